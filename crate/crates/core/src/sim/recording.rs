use crate::limits::{Limit, ValidationReport, MAX_HIDDEN_SPIKES, MAX_OUTPUT_SPIKES};

/// Full per-step state traces, all row-major by step.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTraces<V> {
    /// `steps × H`
    pub hidden_v_mem: Vec<V>,
    /// `steps × H × S`
    pub hidden_i_syn: Vec<V>,
    /// `steps × H`, each neuron's own spike count before alias routing
    pub hidden_spikes: Vec<u8>,
    /// `steps × O`
    pub output_v_mem: Vec<V>,
    /// `steps × O`
    pub output_i_syn: Vec<V>,
}

/// Output of one evolution. `states` is `None` when recording was disabled.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<V> {
    pub steps: usize,
    pub hidden: usize,
    pub outputs: usize,
    pub synapses: usize,
    pub states: Option<StateTraces<V>>,
    /// `steps × O`
    pub output_spikes: Vec<u8>,
}

pub type SimulationRecording = Recording<i16>;
pub type FloatRecording = Recording<f64>;

impl<V: Copy> Recording<V> {
    pub(crate) fn with_capacity(steps: usize, hidden: usize, outputs: usize, synapses: usize, record: bool) -> Self {
        Self {
            steps: 0,
            hidden,
            outputs,
            synapses,
            states: record.then(|| StateTraces {
                hidden_v_mem: Vec::with_capacity(steps * hidden),
                hidden_i_syn: Vec::with_capacity(steps * hidden * synapses),
                hidden_spikes: Vec::with_capacity(steps * hidden),
                output_v_mem: Vec::with_capacity(steps * outputs),
                output_i_syn: Vec::with_capacity(steps * outputs),
            }),
            output_spikes: Vec::with_capacity(steps * outputs),
        }
    }

    pub fn hidden_v_mem(&self, t: usize, i: usize) -> Option<V> {
        self.states.as_ref().map(|s| s.hidden_v_mem[t * self.hidden + i])
    }

    pub fn hidden_i_syn(&self, t: usize, i: usize, s: usize) -> Option<V> {
        self.states
            .as_ref()
            .map(|st| st.hidden_i_syn[(t * self.hidden + i) * self.synapses + s])
    }

    pub fn hidden_spikes(&self, t: usize, i: usize) -> Option<u8> {
        self.states.as_ref().map(|s| s.hidden_spikes[t * self.hidden + i])
    }

    pub fn output_v_mem(&self, t: usize, o: usize) -> Option<V> {
        self.states.as_ref().map(|s| s.output_v_mem[t * self.outputs + o])
    }

    pub fn output_i_syn(&self, t: usize, o: usize) -> Option<V> {
        self.states.as_ref().map(|s| s.output_i_syn[t * self.outputs + o])
    }

    pub fn output_spike(&self, t: usize, o: usize) -> u8 {
        self.output_spikes[t * self.outputs + o]
    }

    pub fn total_output_spikes(&self) -> u64 {
        self.output_spikes.iter().map(|&s| u64::from(s)).sum()
    }

    /// Maps every state value, keeping spikes and layout.
    pub fn map_states<W>(&self, mut hidden: impl FnMut(usize, V) -> W, mut output: impl FnMut(usize, V) -> W) -> Recording<W> {
        let (h, o, s) = (self.hidden, self.outputs, self.synapses);
        Recording {
            steps: self.steps,
            hidden: h,
            outputs: o,
            synapses: s,
            states: self.states.as_ref().map(|st| StateTraces {
                hidden_v_mem: st.hidden_v_mem.iter().enumerate().map(|(k, &v)| hidden(k % h, v)).collect(),
                hidden_i_syn: st
                    .hidden_i_syn
                    .iter()
                    .enumerate()
                    .map(|(k, &v)| hidden((k / s) % h, v))
                    .collect(),
                hidden_spikes: st.hidden_spikes.clone(),
                output_v_mem: st.output_v_mem.iter().enumerate().map(|(k, &v)| output(k % o, v)).collect(),
                output_i_syn: st.output_i_syn.iter().enumerate().map(|(k, &v)| output(k % o, v)).collect(),
            }),
            output_spikes: self.output_spikes.clone(),
        }
    }
}

/// Per-step spike clamps on a recording.
pub fn validate_recording<V>(rec: &Recording<V>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Some(st) = &rec.states {
        for (k, &n) in st.hidden_spikes.iter().enumerate() {
            if u32::from(n) > MAX_HIDDEN_SPIKES {
                report.violations.push(Limit::HiddenSpikesPerStep.violation(
                    n.into(),
                    format!("t={} hidden {}", k / rec.hidden, k % rec.hidden),
                ));
            }
        }
    }
    for (k, &n) in rec.output_spikes.iter().enumerate() {
        if u32::from(n) > MAX_OUTPUT_SPIKES {
            report.violations.push(Limit::OutputSpikesPerStep.violation(
                n.into(),
                format!("t={} output {}", k / rec.outputs, k % rec.outputs),
            ));
        }
    }
    report
}
