//! JSON network description.
//!
//! ```json
//! {"layers": [
//!   {"type": "linear", "rows": 16, "cols": 8,
//!    "weights": {"init": "uniform", "low": -0.5, "high": 0.5, "seed": 1}},
//!   {"type": "lif", "n": 8, "channels": 1, "tau_mem": 0.02, "tau_syn": [0.01, ...],
//!    "threshold": 1.0, "bias": 0.0},
//!   {"type": "residual", "body": [ ... ]}
//! ]}
//! ```
//!
//! A bare top-level array of layers is also accepted. LIF parameter arrays may
//! be given as a single number, broadcast to every neuron. `tau_syn` may have
//! one entry per neuron (shared by both synapse channels) or one per
//! neuron-channel pair in neuron-major order.

use serde::Deserialize;

use super::{Graph, GraphError, LifParams, Matrix, ModuleId, Network};
use crate::stimulus::SplitMix64;
use crate::ParseError;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum NetworkDescription {
    Layers { layers: Vec<LayerDescription> },
    List(Vec<LayerDescription>),
}

impl NetworkDescription {
    pub fn layers(&self) -> &[LayerDescription] {
        match self {
            Self::Layers { layers } | Self::List(layers) => layers,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LayerDescription {
    Linear {
        rows: usize,
        cols: usize,
        weights: LinearWeightsDescription,
    },
    Lif {
        n: usize,
        #[serde(default = "one")]
        channels: usize,
        tau_mem: Values,
        tau_syn: Values,
        threshold: Values,
        #[serde(default)]
        bias: Option<Values>,
        #[serde(default)]
        w_rec: Option<Vec<Vec<f64>>>,
    },
    Residual {
        body: Vec<LayerDescription>,
    },
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LinearWeightsDescription {
    Explicit(Vec<Vec<f64>>),
    Init(WeightInit),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightInit {
    pub init: String,
    pub low: f64,
    pub high: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Values {
    Scalar(f64),
    List(Vec<f64>),
}

impl Values {
    fn expand(&self, n: usize) -> Vec<f64> {
        match self {
            Values::Scalar(v) => vec![*v; n],
            Values::List(v) => v.clone(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DescriptionError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("layer {index}: {message}")]
    Layer { index: String, message: String },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn parse_network(text: &str) -> Result<NetworkDescription, ParseError> {
    serde_json::from_str(text).map_err(|e| ParseError::from_json("network description", &e))
}

/// Builds and finalizes the network described by `desc`.
pub fn build_network(desc: &NetworkDescription) -> Result<Network, DescriptionError> {
    let mut graph = Graph::new();
    let root = build_sequence(&mut graph, desc.layers(), "")?;
    Ok(graph.finalize(root)?)
}

fn build_sequence(
    graph: &mut Graph,
    layers: &[LayerDescription],
    path: &str,
) -> Result<ModuleId, DescriptionError> {
    if layers.is_empty() {
        return Err(DescriptionError::Layer {
            index: if path.is_empty() { "<root>".into() } else { path.into() },
            message: "layer list is empty".into(),
        });
    }
    let mut modules = Vec::with_capacity(layers.len());
    for (i, layer) in layers.iter().enumerate() {
        let index = if path.is_empty() {
            i.to_string()
        } else {
            format!("{path}.{i}")
        };
        let wrap = |e: GraphError| DescriptionError::Layer {
            index: index.clone(),
            message: e.to_string(),
        };
        let id = match layer {
            LayerDescription::Linear { rows, cols, weights } => {
                let m = linear_matrix(*rows, *cols, weights).map_err(|message| {
                    DescriptionError::Layer {
                        index: index.clone(),
                        message,
                    }
                })?;
                graph.make_linear(m).map_err(wrap)?
            }
            LayerDescription::Lif {
                n,
                channels,
                tau_mem,
                tau_syn,
                threshold,
                bias,
                w_rec,
            } => {
                let n = *n;
                let mut tau_syn = tau_syn.expand(n * channels);
                if tau_syn.len() == n && *channels > 1 {
                    tau_syn = tau_syn
                        .iter()
                        .flat_map(|&t| std::iter::repeat_n(t, *channels))
                        .collect();
                }
                let w_rec = match w_rec {
                    None => None,
                    Some(rows) => Some(Matrix::from_rows(rows).ok_or_else(|| {
                        DescriptionError::Layer {
                            index: index.clone(),
                            message: "w_rec rows are ragged".into(),
                        }
                    })?),
                };
                let params = LifParams {
                    tau_mem: tau_mem.expand(n),
                    tau_syn,
                    threshold: threshold.expand(n),
                    bias: bias.as_ref().map_or(vec![0.0; n], |b| b.expand(n)),
                    w_rec,
                };
                graph.make_lif(params, n, *channels).map_err(wrap)?
            }
            LayerDescription::Residual { body } => {
                let inner = build_sequence(graph, body, &index)?;
                graph.compose_residual(inner).map_err(wrap)?
            }
        };
        modules.push(id);
    }
    Ok(graph.compose_sequential(&modules)?)
}

fn linear_matrix(
    rows: usize,
    cols: usize,
    weights: &LinearWeightsDescription,
) -> Result<Matrix, String> {
    match weights {
        LinearWeightsDescription::Explicit(values) => {
            let m = Matrix::from_rows(values).ok_or("weight rows are ragged")?;
            if m.rows() != rows || m.cols() != cols {
                return Err(format!(
                    "declared {rows}x{cols} but weights are {}x{}",
                    m.rows(),
                    m.cols()
                ));
            }
            Ok(m)
        }
        LinearWeightsDescription::Init(init) => {
            if init.init != "uniform" {
                return Err(format!("unknown weight init {:?}", init.init));
            }
            if !(init.low.is_finite() && init.high.is_finite() && init.low <= init.high) {
                return Err(format!("bad uniform range [{}, {}]", init.low, init.high));
            }
            let mut rng = SplitMix64::new(init.seed);
            let span = init.high - init.low;
            Ok(Matrix::from_fn(rows, cols, |_, _| {
                init.low + span * rng.next_f64()
            }))
        }
    }
}
