//! Post-training quantization to the core's integer bit depths.
//!
//! Both methods pick a positive scale so that the largest incoming weight maps
//! to ±127, then round half away from zero. Thresholds and biases of a neuron
//! share that neuron's weight scale. Time constants become bit-shift decay
//! parameters via [`tau_to_dash`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::limits::{STATE_MAX, STATE_MIN, THRESHOLD_MAX, THRESHOLD_MIN};
use crate::mapper::FloatSpecification;
use crate::ParseError;

/// Largest quantized weight magnitude. `-128` is representable on the core
/// but never produced, keeping the range symmetric.
pub const WEIGHT_QMAX: f64 = 127.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Scales {
    Global { s_hidden: f64, s_out: f64 },
    Channel { hidden: Vec<f64>, out: Vec<f64> },
}

impl Scales {
    pub fn hidden(&self, i: usize) -> f64 {
        match self {
            Scales::Global { s_hidden, .. } => *s_hidden,
            Scales::Channel { hidden, .. } => hidden[i],
        }
    }

    pub fn output(&self, o: usize) -> f64 {
        match self {
            Scales::Global { s_out, .. } => *s_out,
            Scales::Channel { out, .. } => out[o],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizedSpecification {
    pub dt: f64,
    #[serde(rename = "C")]
    pub channels: usize,
    #[serde(rename = "H")]
    pub hidden: usize,
    #[serde(rename = "O")]
    pub outputs: usize,
    #[serde(rename = "S")]
    pub synapses: usize,
    pub w_in_q: Vec<Vec<[i32; 2]>>,
    pub w_rec_q: Vec<Vec<[i32; 2]>>,
    pub w_out_q: Vec<Vec<i32>>,
    pub threshold_hid_q: Vec<i32>,
    pub threshold_out_q: Vec<i32>,
    pub bias_hid_q: Vec<i32>,
    pub bias_out_q: Vec<i32>,
    pub dash_mem_hid: Vec<i32>,
    pub dash_syn_hid: Vec<[i32; 2]>,
    pub dash_mem_out: Vec<i32>,
    pub dash_syn_out: Vec<i32>,
    pub aliases: Vec<Option<usize>>,
    pub scales: Scales,
}

impl QuantizedSpecification {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("quantized spec serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        serde_json::from_str(text).map_err(|e| ParseError::from_json("quantized specification", &e))
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuantizeError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error(transparent)]
    Spec(#[from] crate::mapper::SpecError),
}

/// A threshold whose scaled value did not fit and was clamped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleOverflow {
    pub neuron: String,
    pub scaled: f64,
    pub clamped_to: i32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantized {
    pub spec: QuantizedSpecification,
    pub overflows: Vec<ScaleOverflow>,
}

/// `round(log2(tau / dt))`, clamped to `[0, 15]`.
pub fn tau_to_dash(tau: f64, dt: f64) -> Result<i32, QuantizeError> {
    if !(tau.is_finite() && tau > 0.0 && dt.is_finite() && dt > 0.0) {
        return Err(QuantizeError::Domain(format!(
            "tau and dt must be positive, got tau={tau}, dt={dt}"
        )));
    }
    Ok((tau / dt).log2().round().clamp(0.0, 15.0) as i32)
}

/// Round half away from zero, saturating into `[lo, hi]`.
fn round_clamp(x: f64, lo: i32, hi: i32) -> i32 {
    x.round().clamp(f64::from(lo), f64::from(hi)) as i32
}

fn scale_for(max_abs: f64) -> f64 {
    if max_abs > 0.0 {
        WEIGHT_QMAX / max_abs
    } else {
        1.0
    }
}

fn quantize_weight(w: f64, scale: f64) -> i32 {
    round_clamp(w * scale, -127, 127)
}

struct Builder<'a> {
    spec: &'a FloatSpecification,
    overflows: Vec<ScaleOverflow>,
}

impl Builder<'_> {
    fn threshold(&mut self, name: String, value: f64, scale: f64) -> i32 {
        let scaled = value * scale;
        let q = round_clamp(scaled, THRESHOLD_MIN, THRESHOLD_MAX);
        if scaled.round() > f64::from(THRESHOLD_MAX) {
            self.overflows.push(ScaleOverflow {
                neuron: name,
                scaled,
                clamped_to: q,
            });
        }
        q
    }

    fn finish(
        mut self,
        hidden_scale: &dyn Fn(usize) -> f64,
        out_scale: &dyn Fn(usize) -> f64,
        scales: Scales,
    ) -> Result<Quantized, QuantizeError> {
        let s = self.spec;
        let dash = |tau: f64| tau_to_dash(tau, s.dt);
        let w_in_q = s
            .w_in
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, w)| w.map(|x| quantize_weight(x, hidden_scale(i))))
                    .collect()
            })
            .collect();
        let w_rec_q = s
            .w_rec
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, w)| w.map(|x| quantize_weight(x, hidden_scale(i))))
                    .collect()
            })
            .collect();
        let w_out_q = s
            .w_out
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(o, &x)| quantize_weight(x, out_scale(o)))
                    .collect()
            })
            .collect();
        let threshold_hid_q = (0..s.hidden)
            .map(|i| self.threshold(format!("hidden {i}"), s.threshold_hid[i], hidden_scale(i)))
            .collect();
        let threshold_out_q = (0..s.outputs)
            .map(|o| self.threshold(format!("output {o}"), s.threshold_out[o], out_scale(o)))
            .collect();
        let bias_hid_q = (0..s.hidden)
            .map(|i| round_clamp(s.bias_hid[i] * hidden_scale(i), STATE_MIN, STATE_MAX))
            .collect();
        let bias_out_q = (0..s.outputs)
            .map(|o| round_clamp(s.bias_out[o] * out_scale(o), STATE_MIN, STATE_MAX))
            .collect();
        let spec = QuantizedSpecification {
            dt: s.dt,
            channels: s.channels,
            hidden: s.hidden,
            outputs: s.outputs,
            synapses: s.synapses,
            w_in_q,
            w_rec_q,
            w_out_q,
            threshold_hid_q,
            threshold_out_q,
            bias_hid_q,
            bias_out_q,
            dash_mem_hid: s.tau_mem_hid.iter().map(|&t| dash(t)).collect::<Result<_, _>>()?,
            dash_syn_hid: s
                .tau_syn_hid
                .iter()
                .map(|t| Ok([dash(t[0])?, dash(t[1])?]))
                .collect::<Result<_, QuantizeError>>()?,
            dash_mem_out: s.tau_mem_out.iter().map(|&t| dash(t)).collect::<Result<_, _>>()?,
            dash_syn_out: s.tau_syn_out.iter().map(|&t| dash(t)).collect::<Result<_, _>>()?,
            aliases: s.aliases.clone(),
            scales,
        };
        Ok(Quantized {
            spec,
            overflows: self.overflows,
        })
    }
}

fn max_abs<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    values.fold(0.0, |m, v| m.max(v.abs()))
}

/// One scale for all input and recurrent weights, another for output weights.
pub fn quantize_global(spec: &FloatSpecification) -> Result<Quantized, QuantizeError> {
    spec.check()?;
    let hidden_max = max_abs(spec.w_in.iter().chain(&spec.w_rec).flatten().flatten());
    let out_max = max_abs(spec.w_out.iter().flatten());
    let (s_hidden, s_out) = (scale_for(hidden_max), scale_for(out_max));
    Builder {
        spec,
        overflows: Vec::new(),
    }
    .finish(&|_| s_hidden, &|_| s_out, Scales::Global { s_hidden, s_out })
}

/// One scale per target neuron, from all weights arriving at that neuron.
pub fn quantize_channel(spec: &FloatSpecification) -> Result<Quantized, QuantizeError> {
    spec.check()?;
    let hidden: Vec<f64> = (0..spec.hidden)
        .map(|i| {
            let incoming = spec
                .w_in
                .iter()
                .chain(&spec.w_rec)
                .flat_map(|row| row[i].iter());
            scale_for(max_abs(incoming))
        })
        .collect();
    let out: Vec<f64> = (0..spec.outputs)
        .map(|o| scale_for(max_abs(spec.w_out.iter().map(|row| &row[o]))))
        .collect();
    let scales = Scales::Channel {
        hidden: hidden.clone(),
        out: out.clone(),
    };
    Builder {
        spec,
        overflows: Vec::new(),
    }
    .finish(&|i| hidden[i], &|o| out[o], scales)
}
