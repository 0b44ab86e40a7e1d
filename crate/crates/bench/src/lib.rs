//! Fixtures shared by the benchmarks in `benches/`.

use xylo_core::graph::description::{build_network, parse_network};
use xylo_core::{
    config_from_specification, map_graph, poisson_raster, quantize_global, FloatSpecification, HardwareConfig,
    InputRaster, Network,
};

/// The demo network description shipped with `xylo-core`.
pub const DEMO_NETWORK: &str = include_str!("../../core/data/demo_network.json");

pub const DT: f64 = 0.001;

pub fn demo_network() -> Network {
    let desc = parse_network(DEMO_NETWORK).expect("demo network parses");
    build_network(&desc).expect("demo network builds")
}

/// Mapped specification, sealed configuration and a `steps`-long raster.
pub fn demo_setup(steps: usize) -> (FloatSpecification, HardwareConfig, InputRaster) {
    let spec = map_graph(&demo_network(), DT).expect("demo network maps");
    let quantized = quantize_global(&spec).expect("demo network quantizes").spec;
    let (config, valid, message) = config_from_specification(&quantized);
    assert!(valid, "{message}");
    let raster = poisson_raster(&vec![100.0; spec.channels], steps, DT, 42).expect("valid rates");
    (spec, config, raster)
}
