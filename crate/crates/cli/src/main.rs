//! `xylo`: command-line driver for the deployment pipeline.
//!
//! Exit codes: 0 success, 2 validation or design-rule failure, 3 unreadable or
//! malformed input, 4 internal error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use xylo_core::harness::pipeline::{
    self, build_stage, compare_stage, map_stage, quantize_stage, raster_csv_string, run_pipeline,
    simulate_float_stage, simulate_int_stage, stimulate_stage, validate_stage, FailureKind,
    PipelineError, PipelineOptions, QuantizationMethod, Stage,
};
use xylo_core::harness::compare_recordings;
use xylo_core::hwconfig::{deserialize_config, serialize_config, validate_config};
use xylo_core::mapper::check_design_rules;
use xylo_core::quantize::{Quantized, QuantizedSpecification};
use xylo_core::sim::export::{read_recording_csv, recording_csv_string, summary_json};
use xylo_core::{FloatSpecification, InputRaster};

#[derive(Parser)]
#[command(name = "xylo", version, about = "Map, quantize, validate and simulate SNNs for Xylo-class cores")]
struct Cli {
    /// Simulation time step in seconds.
    #[arg(long, global = true, default_value_t = 0.001)]
    dt: f64,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Seed for stimulus generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Global,
    Channel,
}

impl From<Method> for QuantizationMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Global => QuantizationMethod::Global,
            Method::Channel => QuantizationMethod::Channel,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Int,
    Float,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a network description and print its modules in traversal order.
    Build { network: PathBuf },
    /// Check design rules and write the float specification (spec.json).
    Map { network: PathBuf },
    /// Quantize a float specification (writes quantized.json).
    Quantize {
        spec: PathBuf,
        #[arg(long, value_enum, default_value = "global")]
        method: Method,
    },
    /// Validate a quantized specification (writes config.xcfg.json) or an
    /// existing .xcfg.json configuration against the device limits.
    Validate { input: PathBuf },
    /// Generate a Poisson input raster (writes stimulus.csv).
    Stimulate {
        /// Rates in events per second, comma separated; one value is
        /// broadcast to all channels.
        #[arg(long, value_delimiter = ',', required = true)]
        rates: Vec<f64>,
        #[arg(long)]
        steps: usize,
        /// Channel count when a single rate is broadcast.
        #[arg(long)]
        channels: Option<usize>,
    },
    /// Simulate a configuration (int) or float specification (float) on a raster.
    Simulate {
        #[arg(long, value_enum)]
        backend: Backend,
        /// `.xcfg.json` for the int backend, `spec.json` for the float backend.
        #[arg(long)]
        network: PathBuf,
        #[arg(long)]
        raster: PathBuf,
        /// Keep only output spikes.
        #[arg(long)]
        no_record: bool,
    },
    /// Compare two recordings (writes comparison.json).
    Compare {
        /// Reference recording (usually the float backend's).
        reference: PathBuf,
        /// Recording under test (usually the int backend's).
        candidate: PathBuf,
        /// Quantized specification whose scales unscale the candidate.
        #[arg(long)]
        quantized: Option<PathBuf>,
    },
    /// Run the full pipeline on a network description.
    Run {
        network: PathBuf,
        #[arg(long, value_enum, default_value = "global")]
        method: Method,
        #[arg(long, default_value_t = pipeline::DEFAULT_STEPS)]
        steps: usize,
        #[arg(long, value_delimiter = ',', default_value = "100")]
        rates: Vec<f64>,
        #[arg(long)]
        no_record: bool,
    },
}

fn read(stage: Stage, path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path)
        .map_err(|e| PipelineError::new(stage, FailureKind::Parse, format!("cannot read {}: {e}", path.display())))
}

fn parse_err(stage: Stage, e: impl std::fmt::Display) -> PipelineError {
    PipelineError::new(stage, FailureKind::Parse, e.to_string())
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), PipelineError> {
    let io = |e: std::io::Error| PipelineError::new(Stage::Write, FailureKind::Internal, format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn read_raster(path: &Path) -> Result<InputRaster, PipelineError> {
    let text = read(Stage::Simulate, path)?;
    InputRaster::read_csv(text.as_bytes()).map_err(|e| parse_err(Stage::Simulate, e))
}

fn report_overflows(q: &Quantized) {
    for o in &q.overflows {
        eprintln!(
            "warning: {} scaled to {} and was clamped to {}",
            o.neuron, o.scaled, o.clamped_to
        );
    }
}

fn execute(cli: Cli) -> Result<(), PipelineError> {
    let out = cli.out_dir.as_path();
    match cli.command {
        Command::Build { network } => {
            let net = build_stage(&read(Stage::Build, &network)?)?;
            let order = net
                .traverse()
                .map_err(|e| PipelineError::new(Stage::Build, FailureKind::Validation, e.to_string()))?;
            for (id, depth) in order {
                let m = net.graph().module(id);
                let (i, o) = m.arity();
                println!("{depth}\t{}\t{:?}\t{i} -> {o}", m.name, m.kind());
            }
            let rules = check_design_rules(&net);
            if !rules.is_empty() {
                eprintln!("note: network is not mappable as is:\n{rules}");
            }
        }
        Command::Map { network } => {
            let net = build_stage(&read(Stage::Build, &network)?)?;
            let spec = map_stage(&net, cli.dt)?;
            write(out, pipeline::SPEC_FILE, &spec.to_json())?;
        }
        Command::Quantize { spec, method } => {
            let text = read(Stage::Quantize, &spec)?;
            let spec = FloatSpecification::from_json(&text).map_err(|e| parse_err(Stage::Quantize, e))?;
            let q = quantize_stage(&spec, method.into())?;
            report_overflows(&q);
            write(out, pipeline::QUANTIZED_FILE, &q.spec.to_json())?;
        }
        Command::Validate { input } => {
            let text = read(Stage::Validate, &input)?;
            let is_config = input.to_string_lossy().ends_with(".xcfg.json");
            if is_config {
                let config = deserialize_config(&text).map_err(|e| parse_err(Stage::Validate, e))?;
                let report = validate_config(&config);
                if !report.is_empty() {
                    return Err(PipelineError::new(
                        Stage::Validate,
                        FailureKind::Validation,
                        format!("configuration violates device limits:\n{}", report.message()),
                    ));
                }
                println!("{} is valid", input.display());
            } else {
                let q = QuantizedSpecification::from_json(&text).map_err(|e| parse_err(Stage::Validate, e))?;
                let config = validate_stage(&q)?;
                write(out, pipeline::CONFIG_FILE, &serialize_config(&config))?;
            }
        }
        Command::Stimulate { rates, steps, channels } => {
            let channels = channels.unwrap_or(rates.len());
            let raster = stimulate_stage(&rates, channels, steps, cli.dt, cli.seed)?;
            write(out, pipeline::STIMULUS_FILE, &raster_csv_string(&raster))?;
        }
        Command::Simulate { backend, network, raster, no_record } => {
            let text = read(Stage::Simulate, &network)?;
            let raster = read_raster(&raster)?;
            match backend {
                Backend::Int => {
                    let config = deserialize_config(&text).map_err(|e| parse_err(Stage::Simulate, e))?;
                    let rec = simulate_int_stage(&config, &raster, !no_record)?;
                    write(out, pipeline::RECORDING_INT_FILE, &recording_csv_string(&rec))?;
                    write(out, pipeline::SUMMARY_INT_FILE, &summary_json(&rec))?;
                }
                Backend::Float => {
                    let spec = FloatSpecification::from_json(&text).map_err(|e| parse_err(Stage::Simulate, e))?;
                    let rec = simulate_float_stage(&spec, &raster, !no_record)?;
                    write(out, pipeline::RECORDING_FLOAT_FILE, &recording_csv_string(&rec))?;
                    write(out, pipeline::SUMMARY_FLOAT_FILE, &summary_json(&rec))?;
                }
            }
        }
        Command::Compare { reference, candidate, quantized } => {
            let load = |p: &Path| -> Result<_, PipelineError> {
                read_recording_csv(read(Stage::Compare, p)?.as_bytes()).map_err(|e| parse_err(Stage::Compare, e))
            };
            let (a, b) = (load(&reference)?, load(&candidate)?);
            let report = match quantized {
                Some(q) => {
                    let q = QuantizedSpecification::from_json(&read(Stage::Compare, &q)?)
                        .map_err(|e| parse_err(Stage::Compare, e))?;
                    compare_stage(&a, &b, &q)?
                }
                None => compare_recordings(&a, &b)
                    .map_err(|e| PipelineError::new(Stage::Compare, FailureKind::Validation, e.to_string()))?,
            };
            write(out, pipeline::COMPARISON_FILE, &report.to_json())?;
            println!(
                "exact match: {}; relative output spike difference: {:.4}",
                report.exact_match, report.relative_output_spike_diff
            );
        }
        Command::Run { network, method, steps, rates, no_record } => {
            let options = PipelineOptions {
                dt: cli.dt,
                seed: cli.seed,
                method: method.into(),
                steps,
                rates,
                record: !no_record,
            };
            let outcome = run_pipeline(&read(Stage::Build, &network)?, &options, out)?;
            for o in &outcome.overflows {
                eprintln!("warning: {} scaled to {} and was clamped to {}", o.neuron, o.scaled, o.clamped_to);
            }
            for path in &outcome.written {
                println!("wrote {}", path.display());
            }
            let c = &outcome.comparison;
            println!(
                "output spikes: int {}, float {}; relative difference {:.4}",
                outcome.int_recording.total_output_spikes(),
                outcome.float_recording.total_output_spikes(),
                c.relative_output_spike_diff
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
