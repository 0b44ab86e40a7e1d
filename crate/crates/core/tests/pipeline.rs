mod common;

use std::fs;

use xylo_core::harness::pipeline::{
    compare_stage, run_pipeline, simulate_float_stage, simulate_int_stage, stimulate_stage, validate_stage,
    PipelineOptions, QuantizationMethod, ARTIFACTS, COMPARISON_FILE, CONFIG_FILE, QUANTIZED_FILE, RECORDING_FLOAT_FILE,
    RECORDING_INT_FILE, SPEC_FILE, STIMULUS_FILE,
};
use xylo_core::sim::export::{read_recording_csv, recording_csv_string};
use xylo_core::{deserialize_config, serialize_config, FloatSpecification, InputRaster, QuantizedSpecification};

fn options(method: QuantizationMethod) -> PipelineOptions {
    PipelineOptions { seed: 42, method, ..PipelineOptions::default() }
}

#[test]
fn runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let net = common::demo_network();
    run_pipeline(&net, &options(QuantizationMethod::Global), a.path()).unwrap();
    run_pipeline(&net, &options(QuantizationMethod::Global), b.path()).unwrap();
    for name in ARTIFACTS {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn resuming_from_files_reproduces_downstream_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let opts = options(QuantizationMethod::Channel);
    run_pipeline(&common::demo_network(), &opts, dir.path()).unwrap();
    let read = |name: &str| fs::read_to_string(dir.path().join(name)).unwrap();

    let spec = FloatSpecification::from_json(&read(SPEC_FILE)).unwrap();
    let quantized = QuantizedSpecification::from_json(&read(QUANTIZED_FILE)).unwrap();
    let config = validate_stage(&quantized).unwrap();
    assert_eq!(serialize_config(&config), read(CONFIG_FILE));

    let config = deserialize_config(&read(CONFIG_FILE)).unwrap();
    let raster = InputRaster::read_csv(read(STIMULUS_FILE).as_bytes()).unwrap();
    let regenerated = stimulate_stage(&opts.rates, spec.channels, opts.steps, opts.dt, opts.seed).unwrap();
    assert_eq!(raster, regenerated);

    let int_rec = simulate_int_stage(&config, &raster, true).unwrap();
    assert_eq!(recording_csv_string(&int_rec), read(RECORDING_INT_FILE));
    let float_rec = simulate_float_stage(&spec, &raster, true).unwrap();
    assert_eq!(recording_csv_string(&float_rec), read(RECORDING_FLOAT_FILE));

    // comparison from the CSV files alone
    let a = read_recording_csv(read(RECORDING_FLOAT_FILE).as_bytes()).unwrap();
    let b = read_recording_csv(read(RECORDING_INT_FILE).as_bytes()).unwrap();
    assert_eq!(compare_stage(&a, &b, &quantized).unwrap().to_json(), read(COMPARISON_FILE));
}

#[test]
fn global_and_channel_quantization_differ_and_both_validate() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let net = common::demo_network();
    let g = run_pipeline(&net, &options(QuantizationMethod::Global), a.path()).unwrap();
    let c = run_pipeline(&net, &options(QuantizationMethod::Channel), b.path()).unwrap();
    assert_ne!(fs::read(a.path().join(QUANTIZED_FILE)).unwrap(), fs::read(b.path().join(QUANTIZED_FILE)).unwrap());
    assert!(g.config.is_sealed() && c.config.is_sealed());
}

#[test]
fn invalid_network_fails_at_map_stage_with_row_name() {
    let dir = tempfile::tempdir().unwrap();
    let net = r#"{"layers": [
        {"type": "linear", "rows": 4, "cols": 9, "weights": {"init": "uniform", "low": 0, "high": 1, "seed": 3}},
        {"type": "lif", "n": 9, "tau_mem": 0.02, "tau_syn": 0.01, "threshold": 1}]}"#;
    let err = run_pipeline(net, &PipelineOptions::default(), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().starts_with("map stage failed"));
    assert!(err.message.contains("Max. output LIF neurons"), "{}", err.message);
}

#[test]
fn malformed_description_is_a_parse_failure() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline("{\"layers\": [", &PipelineOptions::default(), dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 3);
}
