//! Recording comparison and the end-to-end pipeline driver.

pub mod pipeline;

use serde::Serialize;
use thiserror::Error;

use crate::quantize::Scales;
use crate::sim::Recording;

pub use pipeline::{run_pipeline, PipelineError, PipelineOptions, PipelineOutcome, Stage};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("recordings have different shapes: {0}")]
pub struct ShapeError(pub String);

/// Element-wise comparison of two recordings, `a` being the reference.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub exact_match: bool,
    /// First step at which any compared value differs.
    pub first_divergence_step: Option<usize>,
    /// Whether state traces were compared (both recordings carry them).
    pub states_compared: bool,
    pub max_abs_diff_v_mem: f64,
    pub max_abs_diff_i_syn: f64,
    /// Per hidden neuron, `total(b) − total(a)`; empty when states were not compared.
    pub spike_count_diff_hidden: Vec<i64>,
    /// Per output neuron, `total(b) − total(a)`.
    pub spike_count_diff_output: Vec<i64>,
    /// `|total(b) − total(a)| / max(total(a), 1)` over all compared spikes.
    pub relative_total_spike_diff: f64,
    /// The same ratio over output spikes only.
    pub relative_output_spike_diff: f64,
}

fn mark(first: &mut Option<usize>, t: usize) {
    *first = Some(first.map_or(t, |f| f.min(t)));
}

fn relative(a: u64, b: u64) -> f64 {
    a.abs_diff(b) as f64 / a.max(1) as f64
}

fn spike_diffs(a: &[u8], b: &[u8], n: usize) -> (Vec<i64>, u64, u64) {
    let mut diff = vec![0i64; n];
    let (mut ta, mut tb) = (0u64, 0u64);
    if n > 0 {
        for (k, (&x, &y)) in a.iter().zip(b).enumerate() {
            diff[k % n] += i64::from(y) - i64::from(x);
            ta += u64::from(x);
            tb += u64::from(y);
        }
    }
    (diff, ta, tb)
}

/// Compares two recordings of the same network.
pub fn compare_recordings<A, B>(a: &Recording<A>, b: &Recording<B>) -> Result<ComparisonReport, ShapeError>
where
    A: Copy + Into<f64>,
    B: Copy + Into<f64>,
{
    let dims = |r: (usize, usize, usize, usize)| format!("steps={}, H={}, O={}, S={}", r.0, r.1, r.2, r.3);
    let da = (a.steps, a.hidden, a.outputs, a.synapses);
    let db = (b.steps, b.hidden, b.outputs, b.synapses);
    if da != db {
        return Err(ShapeError(format!("{} vs {}", dims(da), dims(db))));
    }
    let (steps, h, o, s) = da;
    let mut first: Option<usize> = None;
    let (mut max_v, mut max_i) = (0.0f64, 0.0f64);
    let diff = |x: A, y: B, t: usize, max: &mut f64, first: &mut Option<usize>| {
        let d = (x.into() - y.into()).abs();
        if d != 0.0 {
            *max = max.max(d);
            mark(first, t);
        }
    };

    let states_compared = a.states.is_some() && b.states.is_some();
    let (mut hidden_diff, mut total_a, mut total_b) = (Vec::new(), 0u64, 0u64);
    if let (Some(sa), Some(sb)) = (&a.states, &b.states) {
        for t in 0..steps {
            for k in t * h..(t + 1) * h {
                diff(sa.hidden_v_mem[k], sb.hidden_v_mem[k], t, &mut max_v, &mut first);
            }
            for k in t * h * s..(t + 1) * h * s {
                diff(sa.hidden_i_syn[k], sb.hidden_i_syn[k], t, &mut max_i, &mut first);
            }
            for k in t * o..(t + 1) * o {
                diff(sa.output_v_mem[k], sb.output_v_mem[k], t, &mut max_v, &mut first);
                diff(sa.output_i_syn[k], sb.output_i_syn[k], t, &mut max_i, &mut first);
            }
        }
        let (d, ta, tb) = spike_diffs(&sa.hidden_spikes, &sb.hidden_spikes, h);
        hidden_diff = d;
        total_a += ta;
        total_b += tb;
        if let Some(k) = sa.hidden_spikes.iter().zip(&sb.hidden_spikes).position(|(x, y)| x != y) {
            mark(&mut first, k / h);
        }
    }
    let (output_diff, oa, ob) = spike_diffs(&a.output_spikes, &b.output_spikes, o);
    if let Some(k) = a.output_spikes.iter().zip(&b.output_spikes).position(|(x, y)| x != y) {
        mark(&mut first, k / o);
    }
    total_a += oa;
    total_b += ob;

    Ok(ComparisonReport {
        exact_match: first.is_none(),
        first_divergence_step: first,
        states_compared,
        max_abs_diff_v_mem: max_v,
        max_abs_diff_i_syn: max_i,
        spike_count_diff_hidden: hidden_diff,
        spike_count_diff_output: output_diff,
        relative_total_spike_diff: relative(total_a, total_b),
        relative_output_spike_diff: relative(oa, ob),
    })
}

/// Divides every state of an integer recording by its neuron's quantization
/// scale, putting it in the float specification's units.
pub fn unscale<V: Copy + Into<f64>>(rec: &Recording<V>, scales: &Scales) -> Recording<f64> {
    rec.map_states(
        |i, v| v.into() / scales.hidden(i),
        |o, v| v.into() / scales.output(o),
    )
}

impl ComparisonReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Every reported difference is finite.
    pub fn is_finite(&self) -> bool {
        self.max_abs_diff_v_mem.is_finite()
            && self.max_abs_diff_i_syn.is_finite()
            && self.relative_total_spike_diff.is_finite()
            && self.relative_output_spike_diff.is_finite()
    }
}
