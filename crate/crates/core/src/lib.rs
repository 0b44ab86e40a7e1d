//! Lowering, quantization, validation and simulation of spiking neural
//! networks for Xylo-class neuromorphic cores.
//!
//! The pipeline runs in the same order as the modules below:
//!
//! 1. [`graph`] builds a static module/node graph from layers and combinators.
//! 2. [`mapper`] checks design rules and packs the graph into dense matrices.
//! 3. [`quantize`] converts real parameters to the core's integer bit depths.
//! 4. [`hwconfig`] produces a validated hardware configuration.
//! 5. [`sim`] evolves the configuration bit-exactly, or the float
//!    specification in floating point, from an input raster built by
//!    [`stimulus`].
//! 6. [`harness`] compares recordings and drives the whole pipeline.

pub mod graph;
pub mod harness;
pub mod hwconfig;
pub mod limits;
pub mod mapper;
pub mod quantize;
pub mod sim;
pub mod stimulus;

use std::fmt;

pub use graph::{Graph, GraphError, Matrix, ModuleId, Network, NodeId};
pub use harness::{compare_recordings, ComparisonReport};
pub use hwconfig::{
    config_from_specification, deserialize_config, serialize_config, validate_config,
    HardwareConfig, ValidationReport,
};
pub use limits::Limit;
pub use mapper::{check_design_rules, map_graph, DesignRuleReport, FloatSpecification};
pub use quantize::{quantize_channel, quantize_global, QuantizedSpecification, Scales};
pub use sim::{
    bitshift_decay, evolve, evolve_float, FloatRecording, Recording, SimError,
    SimulationRecording,
};
pub use stimulus::{poisson_raster, InputRaster, SplitMix64};

/// Malformed input text, with the location of the problem when known.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub context: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ParseError {
    pub fn new(context: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            context: context.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub(crate) fn from_json(context: &str, err: &serde_json::Error) -> Self {
        Self {
            context: context.into(),
            line: Some(err.line()),
            column: Some(err.column()),
            message: err.to_string(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error in {}", self.context)?;
        match (self.line, self.column) {
            (Some(l), Some(c)) => write!(f, " at line {l}, column {c}")?,
            (Some(l), None) => write!(f, " at line {l}")?,
            _ => {}
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ParseError {}
