//! Stage functions of the deployment flow and the all-in-one driver.
//!
//! Every stage consumes the previous stage's artifact in its on-disk form, so
//! a run can be resumed from any intermediate file with identical results.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::graph::description::{build_network, parse_network, DescriptionError};
use crate::graph::Network;
use crate::hwconfig::{config_from_specification, serialize_config, HardwareConfig};
use crate::mapper::{map_graph, FloatSpecification, MappingError};
use crate::quantize::{quantize_channel, quantize_global, Quantized, QuantizedSpecification, ScaleOverflow};
use crate::sim::export::{plot_membrane_csv, plot_spikes_csv, plot_synaptic_csv, recording_csv_string, summary_json};
use crate::sim::{evolve, evolve_float, FloatRecording, SimulationRecording};
use crate::stimulus::{poisson_raster, InputRaster};

use super::{compare_recordings, unscale, ComparisonReport};

pub const SPEC_FILE: &str = "spec.json";
pub const QUANTIZED_FILE: &str = "quantized.json";
pub const CONFIG_FILE: &str = "config.xcfg.json";
pub const STIMULUS_FILE: &str = "stimulus.csv";
pub const RECORDING_INT_FILE: &str = "recording_int.csv";
pub const SUMMARY_INT_FILE: &str = "summary_int.json";
pub const RECORDING_FLOAT_FILE: &str = "recording_float.csv";
pub const SUMMARY_FLOAT_FILE: &str = "summary_float.json";
pub const COMPARISON_FILE: &str = "comparison.json";
pub const PLOT_SPIKES_FILE: &str = "plot_spikes.csv";
pub const PLOT_MEMBRANE_FILE: &str = "plot_membrane.csv";
pub const PLOT_SYNAPTIC_FILE: &str = "plot_synaptic.csv";

/// Every file `run_pipeline` writes, in write order.
pub const ARTIFACTS: [&str; 12] = [
    SPEC_FILE,
    QUANTIZED_FILE,
    CONFIG_FILE,
    STIMULUS_FILE,
    RECORDING_INT_FILE,
    SUMMARY_INT_FILE,
    RECORDING_FLOAT_FILE,
    SUMMARY_FLOAT_FILE,
    COMPARISON_FILE,
    PLOT_SPIKES_FILE,
    PLOT_MEMBRANE_FILE,
    PLOT_SYNAPTIC_FILE,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Build,
    Map,
    Quantize,
    Validate,
    Stimulate,
    Simulate,
    Compare,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Build => "build",
            Stage::Map => "map",
            Stage::Quantize => "quantize",
            Stage::Validate => "validate",
            Stage::Stimulate => "stimulate",
            Stage::Simulate => "simulate",
            Stage::Compare => "compare",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureKind {
    /// Malformed input text.
    Parse,
    /// Design-rule or device-limit violation.
    Validation,
    /// Anything else: I/O, inconsistent artifacts, broken invariants.
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: FailureKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: FailureKind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
        }
    }

    /// Process exit code: 2 validation, 3 parse, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            FailureKind::Validation => 2,
            FailureKind::Parse => 3,
            FailureKind::Internal => 4,
        }
    }
}

impl fmt::Display for PipelineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} stage failed: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuantizationMethod {
    #[default]
    Global,
    Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOptions {
    pub dt: f64,
    pub seed: u64,
    pub method: QuantizationMethod,
    pub steps: usize,
    /// Poisson rate per input channel in events per second; a single value
    /// applies to every channel.
    pub rates: Vec<f64>,
    pub record: bool,
}

pub const DEFAULT_STEPS: usize = 500;
pub const DEFAULT_RATE: f64 = 100.0;

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            dt: 0.001,
            seed: 0,
            method: QuantizationMethod::Global,
            steps: DEFAULT_STEPS,
            rates: vec![DEFAULT_RATE],
            record: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub spec: FloatSpecification,
    pub quantized: QuantizedSpecification,
    pub overflows: Vec<ScaleOverflow>,
    pub config: HardwareConfig,
    pub raster: InputRaster,
    pub int_recording: SimulationRecording,
    pub float_recording: FloatRecording,
    pub comparison: ComparisonReport,
    pub written: Vec<PathBuf>,
}

pub fn build_stage(network_text: &str) -> Result<Network, PipelineError> {
    let desc = parse_network(network_text).map_err(|e| PipelineError::new(Stage::Build, FailureKind::Parse, e.to_string()))?;
    build_network(&desc).map_err(|e| {
        let kind = match e {
            DescriptionError::Parse(_) => FailureKind::Parse,
            DescriptionError::Layer { .. } | DescriptionError::Graph(_) => FailureKind::Validation,
        };
        PipelineError::new(Stage::Build, kind, e.to_string())
    })
}

pub fn map_stage(network: &Network, dt: f64) -> Result<FloatSpecification, PipelineError> {
    map_graph(network, dt).map_err(|e| {
        let kind = match e {
            MappingError::DesignRules(_) => FailureKind::Validation,
            MappingError::InvalidDt(_) => FailureKind::Parse,
        };
        PipelineError::new(Stage::Map, kind, e.to_string())
    })
}

pub fn quantize_stage(spec: &FloatSpecification, method: QuantizationMethod) -> Result<Quantized, PipelineError> {
    let result = match method {
        QuantizationMethod::Global => quantize_global(spec),
        QuantizationMethod::Channel => quantize_channel(spec),
    };
    result.map_err(|e| PipelineError::new(Stage::Quantize, FailureKind::Validation, e.to_string()))
}

/// Builds the configuration; fails with the full violation list when invalid.
pub fn validate_stage(quantized: &QuantizedSpecification) -> Result<HardwareConfig, PipelineError> {
    let (config, valid, message) = config_from_specification(quantized);
    if valid {
        Ok(config)
    } else {
        Err(PipelineError::new(
            Stage::Validate,
            FailureKind::Validation,
            format!("configuration violates device limits:\n{message}"),
        ))
    }
}

pub fn stimulate_stage(rates: &[f64], channels: usize, steps: usize, dt: f64, seed: u64) -> Result<InputRaster, PipelineError> {
    let rates: Vec<f64> = match rates {
        [r] => vec![*r; channels],
        r if r.len() == channels => r.to_vec(),
        r => {
            return Err(PipelineError::new(
                Stage::Stimulate,
                FailureKind::Parse,
                format!("{} rates given for {channels} input channels", r.len()),
            ))
        }
    };
    poisson_raster(&rates, steps, dt, seed).map_err(|e| PipelineError::new(Stage::Stimulate, FailureKind::Parse, e.to_string()))
}

pub fn simulate_int_stage(config: &HardwareConfig, raster: &InputRaster, record: bool) -> Result<SimulationRecording, PipelineError> {
    evolve(config, raster, record).map_err(|e| PipelineError::new(Stage::Simulate, FailureKind::Validation, e.to_string()))
}

pub fn simulate_float_stage(spec: &FloatSpecification, raster: &InputRaster, record: bool) -> Result<FloatRecording, PipelineError> {
    evolve_float(spec, raster, record).map_err(|e| PipelineError::new(Stage::Simulate, FailureKind::Validation, e.to_string()))
}

/// Float reference against the integer recording, the latter unscaled into
/// the float units.
pub fn compare_stage(
    float_rec: &FloatRecording,
    int_rec: &crate::sim::Recording<impl Copy + Into<f64>>,
    quantized: &QuantizedSpecification,
) -> Result<ComparisonReport, PipelineError> {
    let unscaled = unscale(int_rec, &quantized.scales);
    compare_recordings(float_rec, &unscaled).map_err(|e| PipelineError::new(Stage::Compare, FailureKind::Internal, e.to_string()))
}

pub fn raster_csv_string(raster: &InputRaster) -> String {
    let mut buf = Vec::new();
    raster.write_csv(&mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

fn write_file(dir: &Path, name: &str, contents: &str, written: &mut Vec<PathBuf>) -> Result<(), PipelineError> {
    let path = dir.join(name);
    fs::write(&path, contents)
        .map_err(|e| PipelineError::new(Stage::Write, FailureKind::Internal, format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(())
}

/// Runs every stage on `network_text` and writes all artifacts to `out_dir`.
///
/// Artifacts of stages that succeeded are written before a later stage's
/// failure is returned.
pub fn run_pipeline(network_text: &str, options: &PipelineOptions, out_dir: &Path) -> Result<PipelineOutcome, PipelineError> {
    fs::create_dir_all(out_dir)
        .map_err(|e| PipelineError::new(Stage::Write, FailureKind::Internal, format!("{}: {e}", out_dir.display())))?;
    let mut written = Vec::new();

    let network = build_stage(network_text)?;
    let spec = map_stage(&network, options.dt)?;
    write_file(out_dir, SPEC_FILE, &spec.to_json(), &mut written)?;
    let Quantized { spec: quantized, overflows } = quantize_stage(&spec, options.method)?;
    write_file(out_dir, QUANTIZED_FILE, &quantized.to_json(), &mut written)?;
    let config = validate_stage(&quantized)?;
    write_file(out_dir, CONFIG_FILE, &serialize_config(&config), &mut written)?;
    let raster = stimulate_stage(&options.rates, spec.channels, options.steps, options.dt, options.seed)?;
    write_file(out_dir, STIMULUS_FILE, &raster_csv_string(&raster), &mut written)?;

    let int_recording = simulate_int_stage(&config, &raster, options.record)?;
    write_file(out_dir, RECORDING_INT_FILE, &recording_csv_string(&int_recording), &mut written)?;
    write_file(out_dir, SUMMARY_INT_FILE, &summary_json(&int_recording), &mut written)?;
    let float_recording = simulate_float_stage(&spec, &raster, options.record)?;
    write_file(out_dir, RECORDING_FLOAT_FILE, &recording_csv_string(&float_recording), &mut written)?;
    write_file(out_dir, SUMMARY_FLOAT_FILE, &summary_json(&float_recording), &mut written)?;

    let comparison = compare_stage(&float_recording, &int_recording, &quantized)?;
    if !comparison.is_finite() {
        return Err(PipelineError::new(Stage::Compare, FailureKind::Internal, "comparison produced non-finite values"));
    }
    write_file(out_dir, COMPARISON_FILE, &comparison.to_json(), &mut written)?;
    write_file(out_dir, PLOT_SPIKES_FILE, &plot_spikes_csv(&int_recording), &mut written)?;
    write_file(out_dir, PLOT_MEMBRANE_FILE, &plot_membrane_csv(&int_recording), &mut written)?;
    write_file(out_dir, PLOT_SYNAPTIC_FILE, &plot_synaptic_csv(&int_recording), &mut written)?;

    Ok(PipelineOutcome {
        spec,
        quantized,
        overflows,
        config,
        raster,
        int_recording,
        float_recording,
        comparison,
        written,
    })
}
