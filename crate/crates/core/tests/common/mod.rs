//! Shared test fixtures: random generators and oracle comparison.
#![allow(dead_code)]

pub mod oracle;

use std::path::PathBuf;

use xylo_core::hwconfig::{Alias, InitialState};
use xylo_core::{FloatSpecification, HardwareConfig, InputRaster, SimulationRecording, SplitMix64};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn demo_network() -> String {
    std::fs::read_to_string(data_dir().join("demo_network.json")).expect("demo network present")
}

/// `(sha256, file name)` pairs of the committed golden artifacts.
pub fn golden_hashes() -> Vec<(String, String)> {
    let text = std::fs::read_to_string(data_dir().join("golden_demo.sha256")).expect("golden hashes present");
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (hash, name) = l.split_once("  ").expect("sha256sum format");
            (hash.to_string(), name.to_string())
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub struct Rng(SplitMix64);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self(SplitMix64::new(seed))
    }

    /// Uniform integer in `lo..=hi`.
    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as i64
    }

    pub fn real(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.0.next_f64()
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.0.next_f64() < p
    }
}

/// A random configuration within every device limit.
pub fn random_config(rng: &mut Rng, with_aliases: bool) -> HardwareConfig {
    let c = rng.int(1, 16) as usize;
    let h = rng.int(1, 16) as usize;
    let o = rng.int(1, 2) as usize;
    let s = rng.int(1, 2) as usize;
    let mut cfg = HardwareConfig::zeros(0.001, c, h, o, s);
    let weight = |rng: &mut Rng| if rng.chance(0.6) { rng.int(-128, 127) as i32 } else { 0 };
    for row in cfg.w_in.iter_mut().chain(cfg.w_rec.iter_mut()) {
        for w in row.iter_mut() {
            for slot in w.iter_mut().take(s) {
                *slot = weight(rng);
            }
        }
    }
    for row in cfg.w_out.iter_mut() {
        for w in row.iter_mut() {
            *w = weight(rng);
        }
    }
    for i in 0..h {
        cfg.threshold_hid[i] = if rng.chance(0.1) { rng.int(1, 32767) } else { rng.int(1, 3000) } as i32;
        cfg.bias_hid[i] = rng.int(-200, 200) as i32;
        cfg.dash_mem_hid[i] = rng.int(0, 15) as i32;
        for k in 0..s {
            cfg.dash_syn_hid[i][k] = rng.int(0, 15) as i32;
        }
    }
    for k in 0..o {
        cfg.threshold_out[k] = rng.int(1, 5000) as i32;
        cfg.bias_out[k] = rng.int(-200, 200) as i32;
        cfg.dash_mem_out[k] = rng.int(0, 15) as i32;
        cfg.dash_syn_out[k] = rng.int(0, 15) as i32;
    }
    if with_aliases && h > 1 {
        for src in 0..h {
            if rng.chance(0.4) {
                let mut target = rng.int(0, h as i64 - 1) as usize;
                if target == src {
                    target = (target + 1) % h;
                }
                cfg.aliases.push(Alias { source: src, target });
            }
        }
    }
    if rng.chance(0.25) {
        let state = |rng: &mut Rng| rng.int(-32768, 32767) as i32;
        cfg.initial_state = Some(InitialState {
            v_mem_hid: (0..h).map(|_| state(rng)).collect(),
            i_syn_hid: (0..h).map(|_| {
                let mut pair = [state(rng), state(rng)];
                if s == 1 {
                    pair[1] = 0;
                }
                pair
            }).collect(),
            v_mem_out: (0..o).map(|_| state(rng)).collect(),
            i_syn_out: (0..o).map(|_| state(rng)).collect(),
        });
    }
    let report = cfg.seal();
    assert!(report.is_empty(), "generator produced an invalid config:\n{}", report.message());
    cfg
}

pub fn random_raster(rng: &mut Rng, steps: usize, channels: usize) -> InputRaster {
    let density = rng.real(0.05, 0.6);
    let counts = (0..steps * channels)
        .map(|_| if rng.chance(density) { rng.int(1, 15) as u8 } else { 0 })
        .collect();
    InputRaster::new(steps, channels, counts).expect("shape matches")
}

/// Number of recorded values that differ from the oracle.
pub fn oracle_mismatches(cfg: &HardwareConfig, raster: &InputRaster, rec: &SimulationRecording) -> usize {
    let rows: Vec<Vec<u8>> = (0..raster.steps()).map(|t| raster.row(t).to_vec()).collect();
    let expected = oracle::run(cfg, &rows);
    let mut bad = 0;
    let mut check = |a: i64, b: i64| bad += usize::from(a != b);
    for (t, step) in expected.iter().enumerate() {
        for i in 0..cfg.hidden {
            check(step.v_hid[i], rec.hidden_v_mem(t, i).unwrap().into());
            check(step.spikes_hid[i], rec.hidden_spikes(t, i).unwrap().into());
            for s in 0..cfg.synapses {
                check(step.i_hid[i][s], rec.hidden_i_syn(t, i, s).unwrap().into());
            }
        }
        for k in 0..cfg.outputs {
            check(step.v_out[k], rec.output_v_mem(t, k).unwrap().into());
            check(step.i_out[k], rec.output_i_syn(t, k).unwrap().into());
            check(step.spikes_out[k], rec.output_spike(t, k).into());
        }
    }
    bad + expected.len().abs_diff(rec.steps)
}

/// A random, valid float specification with non-zero input and output weights.
pub fn random_spec(rng: &mut Rng) -> FloatSpecification {
    let c = rng.int(1, 16) as usize;
    let h = rng.int(1, 24) as usize;
    let o = rng.int(1, 8) as usize;
    let s = rng.int(1, 2) as usize;
    let dt = 0.001;
    let mut spec = FloatSpecification::zeros(dt, c, h, o, s);
    let weight = |rng: &mut Rng| if rng.chance(0.7) { rng.real(-2.0, 2.0) } else { 0.0 };
    for row in spec.w_in.iter_mut().chain(spec.w_rec.iter_mut()) {
        for w in row.iter_mut() {
            for slot in w.iter_mut().take(s) {
                *slot = weight(rng);
            }
        }
    }
    for row in spec.w_out.iter_mut() {
        for w in row.iter_mut() {
            *w = weight(rng);
        }
    }
    // both weight groups non-empty: an all-zero group takes the fixed scale 1,
    // which by design does not follow a rescaling of the specification
    spec.w_in[rng.int(0, c as i64 - 1) as usize][rng.int(0, h as i64 - 1) as usize][0] = rng.real(0.1, 2.0);
    spec.w_out[rng.int(0, h as i64 - 1) as usize][rng.int(0, o as i64 - 1) as usize] = -rng.real(0.1, 2.0);
    for i in 0..h {
        spec.tau_mem_hid[i] = dt * rng.real(1.0, 40000.0);
        for k in 0..2 {
            spec.tau_syn_hid[i][k] = dt * rng.real(1.0, 40000.0);
        }
        spec.threshold_hid[i] = rng.real(0.1, 50.0);
        spec.bias_hid[i] = rng.real(-1.0, 1.0);
    }
    for k in 0..o {
        spec.tau_mem_out[k] = dt * rng.real(1.0, 1000.0);
        spec.tau_syn_out[k] = dt * rng.real(1.0, 1000.0);
        spec.threshold_out[k] = rng.real(0.1, 50.0);
        spec.bias_out[k] = rng.real(-1.0, 1.0);
    }
    spec.check().expect("generator produced a valid spec");
    spec
}
