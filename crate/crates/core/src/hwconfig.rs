//! Validated hardware configuration and its `.xcfg.json` file format.
//!
//! The file is canonical JSON: fixed key order, integers in decimal and `dt` as
//! a decimal string. Field set:
//!
//! | key | shape |
//! |-----|-------|
//! | `dt` | string, seconds |
//! | `C`, `H`, `O`, `S` | input channels, hidden neurons, output neurons, hidden synapse channels |
//! | `output_synapses` | synapse channels per output neuron |
//! | `w_in` | `C × H × 2` |
//! | `w_rec` | `H × H × 2`, `[source][target][channel]` |
//! | `w_out` | `H × O` |
//! | `threshold_hid`, `bias_hid`, `dash_mem_hid` | `H` |
//! | `dash_syn_hid` | `H × 2` |
//! | `threshold_out`, `bias_out`, `dash_mem_out`, `dash_syn_out` | `O` |
//! | `aliases` | list of `{"source": s, "target": t}` in the neuron index space (hidden `0..H`, outputs `H..H+O`) |
//! | `initial_state` | optional `{v_mem_hid, i_syn_hid, v_mem_out, i_syn_out}` |
//!
//! The validity seal is never stored; it is recomputed on load.

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::limits::{
    Limit, MAX_DECAY, MAX_HIDDEN_NEURONS, MAX_HIDDEN_SYNAPSES, MAX_INPUT_CHANNELS,
    MAX_OUTPUT_NEURONS, MAX_OUTPUT_SYNAPSES, MAX_TIME_CONSTANT_STEPS, STATE_MAX, STATE_MIN,
    THRESHOLD_MAX, THRESHOLD_MIN, WEIGHT_MAX, WEIGHT_MIN,
};
use crate::quantize::QuantizedSpecification;
use crate::ParseError;

pub use crate::limits::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Alias {
    pub source: usize,
    pub target: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub v_mem_hid: Vec<i32>,
    pub i_syn_hid: Vec<[i32; 2]>,
    pub v_mem_out: Vec<i32>,
    pub i_syn_out: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareConfig {
    #[serde(serialize_with = "dt_to_string", deserialize_with = "dt_from_string")]
    pub dt: f64,
    #[serde(rename = "C")]
    pub channels: usize,
    #[serde(rename = "H")]
    pub hidden: usize,
    #[serde(rename = "O")]
    pub outputs: usize,
    #[serde(rename = "S")]
    pub synapses: usize,
    pub output_synapses: usize,
    pub w_in: Vec<Vec<[i32; 2]>>,
    pub w_rec: Vec<Vec<[i32; 2]>>,
    pub w_out: Vec<Vec<i32>>,
    pub threshold_hid: Vec<i32>,
    pub bias_hid: Vec<i32>,
    pub dash_mem_hid: Vec<i32>,
    pub dash_syn_hid: Vec<[i32; 2]>,
    pub threshold_out: Vec<i32>,
    pub bias_out: Vec<i32>,
    pub dash_mem_out: Vec<i32>,
    pub dash_syn_out: Vec<i32>,
    pub aliases: Vec<Alias>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(skip)]
    sealed: bool,
}

fn dt_to_string<S: Serializer>(dt: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&dt.to_string())
}

fn dt_from_string<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    let text = String::deserialize(d)?;
    text.trim()
        .parse::<f64>()
        .map_err(|e| serde::de::Error::custom(format!("dt {text:?}: {e}")))
}

impl HardwareConfig {
    /// All-zero network with unit thresholds. Not sealed.
    pub fn zeros(dt: f64, channels: usize, hidden: usize, outputs: usize, synapses: usize) -> Self {
        Self {
            dt,
            channels,
            hidden,
            outputs,
            synapses,
            output_synapses: 1,
            w_in: vec![vec![[0; 2]; hidden]; channels],
            w_rec: vec![vec![[0; 2]; hidden]; hidden],
            w_out: vec![vec![0; outputs]; hidden],
            threshold_hid: vec![1; hidden],
            bias_hid: vec![0; hidden],
            dash_mem_hid: vec![0; hidden],
            dash_syn_hid: vec![[0; 2]; hidden],
            threshold_out: vec![1; outputs],
            bias_out: vec![0; outputs],
            dash_mem_out: vec![0; outputs],
            dash_syn_out: vec![0; outputs],
            aliases: Vec::new(),
            initial_state: None,
            sealed: false,
        }
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    /// Re-validates and sets the seal accordingly.
    pub fn seal(&mut self) -> ValidationReport {
        let report = validate_config(self);
        self.sealed = report.is_empty();
        report
    }

    /// Alias target of each hidden neuron, for a sealed config.
    pub fn alias_targets(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.hidden];
        for a in &self.aliases {
            if a.source < self.hidden {
                out[a.source] = Some(a.target);
            }
        }
        out
    }

    /// Shape mismatches between the declared dimensions and the arrays.
    pub fn structural_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let (c, h, o) = (self.channels, self.hidden, self.outputs);
        let mut dims = |name: &str, rows: usize, want_rows: usize, cols: Vec<usize>, want_cols: usize| {
            if rows != want_rows || cols.iter().any(|&n| n != want_cols) {
                problems.push(format!("{name} must be {want_rows}x{want_cols}"));
            }
        };
        dims("w_in", self.w_in.len(), c, self.w_in.iter().map(Vec::len).collect(), h);
        dims("w_rec", self.w_rec.len(), h, self.w_rec.iter().map(Vec::len).collect(), h);
        dims("w_out", self.w_out.len(), h, self.w_out.iter().map(Vec::len).collect(), o);
        let mut lens = vec![
            ("threshold_hid", self.threshold_hid.len(), h),
            ("bias_hid", self.bias_hid.len(), h),
            ("dash_mem_hid", self.dash_mem_hid.len(), h),
            ("dash_syn_hid", self.dash_syn_hid.len(), h),
            ("threshold_out", self.threshold_out.len(), o),
            ("bias_out", self.bias_out.len(), o),
            ("dash_mem_out", self.dash_mem_out.len(), o),
            ("dash_syn_out", self.dash_syn_out.len(), o),
        ];
        if let Some(init) = &self.initial_state {
            lens.extend([
                ("initial_state.v_mem_hid", init.v_mem_hid.len(), h),
                ("initial_state.i_syn_hid", init.i_syn_hid.len(), h),
                ("initial_state.v_mem_out", init.v_mem_out.len(), o),
                ("initial_state.i_syn_out", init.i_syn_out.len(), o),
            ]);
        }
        for (name, len, want) in lens {
            if len != want {
                problems.push(format!("{name} has length {len}, expected {want}"));
            }
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            problems.push(format!("dt must be positive, got {}", self.dt));
        }
        problems
    }
}

/// Checks every device limit. Pure; does not touch the seal.
pub fn validate_config(config: &HardwareConfig) -> ValidationReport {
    let mut report = ValidationReport {
        violations: Vec::new(),
        structural: config.structural_problems(),
    };
    if !report.structural.is_empty() {
        return report;
    }
    let v = &mut report.violations;
    let (h, o) = (config.hidden, config.outputs);

    if config.channels > MAX_INPUT_CHANNELS {
        v.push(Limit::InputChannels.violation(config.channels as i64, "C"));
    }
    if h > MAX_HIDDEN_NEURONS {
        v.push(Limit::HiddenNeurons.violation(h as i64, "H"));
    }
    if !(1..=MAX_HIDDEN_SYNAPSES).contains(&config.synapses) {
        v.push(Limit::HiddenInputSynapses.violation(config.synapses as i64, "S"));
    } else if config.synapses == 1 {
        let uses_second = config
            .w_in
            .iter()
            .chain(&config.w_rec)
            .flatten()
            .any(|w| w[1] != 0);
        if uses_second {
            v.push(Limit::HiddenInputSynapses.violation(2, "S = 1 but synapse channel 1 has weights"));
        }
    }

    let mut per_source: BTreeMap<usize, usize> = BTreeMap::new();
    for a in &config.aliases {
        *per_source.entry(a.source).or_default() += 1;
        if a.source >= h {
            v.push(Limit::AliasTargets.violation(
                a.source as i64,
                format!("alias source {} is not a hidden neuron", a.source),
            ));
        }
        if a.target >= h {
            v.push(Limit::AliasTargets.violation(
                a.target as i64,
                format!("alias target {} is not a hidden neuron", a.target),
            ));
        }
    }
    for (src, n) in per_source {
        if n > 1 {
            v.push(Limit::AliasTargets.violation(n as i64, format!("hidden neuron {src} has {n} alias targets")));
        }
    }

    if o > MAX_OUTPUT_NEURONS {
        v.push(Limit::OutputNeurons.violation(o as i64, "O"));
    }
    if config.output_synapses != MAX_OUTPUT_SYNAPSES {
        v.push(Limit::OutputInputSynapses.violation(config.output_synapses as i64, "output_synapses"));
    }

    let weight_ok = |w: i32| (WEIGHT_MIN..=WEIGHT_MAX).contains(&w);
    for (c, row) in config.w_in.iter().enumerate() {
        for (i, w) in row.iter().enumerate() {
            for (s, &x) in w.iter().enumerate() {
                if !weight_ok(x) {
                    v.push(Limit::WeightBitDepth.violation(x.into(), format!("w_in[{c}][{i}][{s}]")));
                }
            }
        }
    }
    for (j, row) in config.w_rec.iter().enumerate() {
        for (i, w) in row.iter().enumerate() {
            for (s, &x) in w.iter().enumerate() {
                if !weight_ok(x) {
                    v.push(Limit::WeightBitDepth.violation(x.into(), format!("w_rec[{j}][{i}][{s}]")));
                }
            }
        }
    }
    for (j, row) in config.w_out.iter().enumerate() {
        for (k, &x) in row.iter().enumerate() {
            if !weight_ok(x) {
                v.push(Limit::WeightBitDepth.violation(x.into(), format!("w_out[{j}][{k}]")));
            }
        }
    }

    let state_ok = |x: i32| (STATE_MIN..=STATE_MAX).contains(&x);
    if let Some(init) = &config.initial_state {
        let syn = init
            .i_syn_hid
            .iter()
            .enumerate()
            .flat_map(|(i, s)| s.iter().enumerate().map(move |(k, &x)| (format!("initial i_syn_hid[{i}][{k}]"), x)))
            .chain(init.i_syn_out.iter().enumerate().map(|(o, &x)| (format!("initial i_syn_out[{o}]"), x)));
        for (loc, x) in syn {
            if !state_ok(x) {
                v.push(Limit::SynapticStateBitDepth.violation(x.into(), loc));
            }
        }
        let mem = init
            .v_mem_hid
            .iter()
            .enumerate()
            .map(|(i, &x)| (format!("initial v_mem_hid[{i}]"), x))
            .chain(init.v_mem_out.iter().enumerate().map(|(o, &x)| (format!("initial v_mem_out[{o}]"), x)));
        for (loc, x) in mem {
            if !state_ok(x) {
                v.push(Limit::MembraneStateBitDepth.violation(x.into(), loc));
            }
        }
    }
    let biases = config
        .bias_hid
        .iter()
        .enumerate()
        .map(|(i, &b)| (format!("bias_hid[{i}]"), b))
        .chain(config.bias_out.iter().enumerate().map(|(k, &b)| (format!("bias_out[{k}]"), b)));
    for (loc, b) in biases {
        if !state_ok(b) {
            v.push(Limit::MembraneStateBitDepth.violation(b.into(), loc));
        }
    }

    let thresholds = config
        .threshold_hid
        .iter()
        .enumerate()
        .map(|(i, &t)| (format!("threshold_hid[{i}]"), t))
        .chain(config.threshold_out.iter().enumerate().map(|(k, &t)| (format!("threshold_out[{k}]"), t)));
    for (loc, t) in thresholds {
        if !(THRESHOLD_MIN..=THRESHOLD_MAX).contains(&t) {
            v.push(Limit::ThresholdBitDepth.violation(t.into(), loc));
        }
    }

    let dashes = config
        .dash_mem_hid
        .iter()
        .enumerate()
        .map(|(i, &d)| (format!("dash_mem_hid[{i}]"), d))
        .chain(config.dash_syn_hid.iter().enumerate().flat_map(|(i, d)| {
            d.iter().enumerate().map(move |(k, &x)| (format!("dash_syn_hid[{i}][{k}]"), x))
        }))
        .chain(config.dash_mem_out.iter().enumerate().map(|(k, &d)| (format!("dash_mem_out[{k}]"), d)))
        .chain(config.dash_syn_out.iter().enumerate().map(|(k, &d)| (format!("dash_syn_out[{k}]"), d)));
    for (loc, d) in dashes {
        if !(0..1 << crate::limits::DECAY_BITS).contains(&d) {
            v.push(Limit::DecayBitDepth.violation(d.into(), loc.clone()));
        }
        if d > MAX_DECAY {
            v.push(Limit::MaxDecay.violation(d.into(), loc.clone()));
        }
        let steps = if d < 0 { 1 } else { 1i64.checked_shl(d as u32).filter(|s| *s > 0).unwrap_or(i64::MAX) };
        if steps > MAX_TIME_CONSTANT_STEPS {
            v.push(Limit::LongestTimeConstant.violation(steps, loc));
        }
    }
    report
}

/// Builds a configuration from a quantized specification and validates it.
///
/// Returns the configuration (sealed only when valid), the validity flag and a
/// message listing every violation, empty when valid.
pub fn config_from_specification(qspec: &QuantizedSpecification) -> (HardwareConfig, bool, String) {
    let mut config = HardwareConfig {
        dt: qspec.dt,
        channels: qspec.channels,
        hidden: qspec.hidden,
        outputs: qspec.outputs,
        synapses: qspec.synapses,
        output_synapses: 1,
        w_in: qspec.w_in_q.clone(),
        w_rec: qspec.w_rec_q.clone(),
        w_out: qspec.w_out_q.clone(),
        threshold_hid: qspec.threshold_hid_q.clone(),
        bias_hid: qspec.bias_hid_q.clone(),
        dash_mem_hid: qspec.dash_mem_hid.clone(),
        dash_syn_hid: qspec.dash_syn_hid.clone(),
        threshold_out: qspec.threshold_out_q.clone(),
        bias_out: qspec.bias_out_q.clone(),
        dash_mem_out: qspec.dash_mem_out.clone(),
        dash_syn_out: qspec.dash_syn_out.clone(),
        aliases: qspec
            .aliases
            .iter()
            .enumerate()
            .filter_map(|(source, t)| t.map(|target| Alias { source, target }))
            .collect(),
        initial_state: None,
        sealed: false,
    };
    let report = config.seal();
    (config, report.is_empty(), report.message())
}

pub fn serialize_config(config: &HardwareConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

/// Parses a config file. Shape errors are parse errors; limit violations are
/// not, and leave the config unsealed.
pub fn deserialize_config(text: &str) -> Result<HardwareConfig, ParseError> {
    let mut config: HardwareConfig =
        serde_json::from_str(text).map_err(|e| ParseError::from_json("hardware config", &e))?;
    let problems = config.structural_problems();
    if !problems.is_empty() {
        return Err(ParseError::new("hardware config", problems.join("; ")));
    }
    config.seal();
    Ok(config)
}
