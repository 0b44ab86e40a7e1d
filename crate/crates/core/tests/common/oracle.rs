//! Naive scalar reference of the integer core, written independently of the
//! library simulator: one neuron at a time, wide integers, explicit clamps and
//! a per-target pull over all presynaptic sources.

use xylo_core::HardwareConfig;

const LO: i64 = -32768;
const HI: i64 = 32767;

fn clamp16(x: i64) -> i64 {
    if x > HI {
        HI
    } else if x < LO {
        LO
    } else {
        x
    }
}

/// One decay step: subtract `|x| / 2^dash` (at least 1) towards zero.
pub fn decay(x: i64, dash: i64) -> i64 {
    if x == 0 {
        return 0;
    }
    let mut magnitude = x.abs();
    for _ in 0..dash {
        magnitude /= 2;
    }
    if magnitude == 0 {
        magnitude = 1;
    }
    if x > 0 {
        x - magnitude
    } else {
        x + magnitude
    }
}

/// Per-step traces, each entry indexed by neuron (and synapse channel).
#[derive(Debug, Default, Clone, PartialEq)]
pub struct OracleStep {
    pub v_hid: Vec<i64>,
    pub i_hid: Vec<Vec<i64>>,
    pub spikes_hid: Vec<i64>,
    pub v_out: Vec<i64>,
    pub i_out: Vec<i64>,
    pub spikes_out: Vec<i64>,
}

pub fn run(cfg: &HardwareConfig, raster: &[Vec<u8>]) -> Vec<OracleStep> {
    let h = cfg.hidden;
    let o = cfg.outputs;
    let syn = cfg.synapses;

    let mut v_hid = vec![0i64; h];
    let mut i_hid = vec![vec![0i64; syn]; h];
    let mut v_out = vec![0i64; o];
    let mut i_out = vec![0i64; o];
    if let Some(init) = &cfg.initial_state {
        for n in 0..h {
            v_hid[n] = clamp16(init.v_mem_hid[n] as i64);
            for s in 0..syn {
                i_hid[n][s] = clamp16(init.i_syn_hid[n][s] as i64);
            }
        }
        for k in 0..o {
            v_out[k] = clamp16(init.v_mem_out[k] as i64);
            i_out[k] = clamp16(init.i_syn_out[k] as i64);
        }
    }

    let mut previous = vec![0i64; h];
    let mut trace = Vec::with_capacity(raster.len());
    for input in raster {
        // hidden synapses
        for n in 0..h {
            for s in 0..syn {
                let mut acc = decay(i_hid[n][s], cfg.dash_syn_hid[n][s] as i64);
                for c in 0..cfg.channels {
                    acc += cfg.w_in[c][n][s] as i64 * input[c] as i64;
                }
                for src in 0..h {
                    acc += cfg.w_rec[src][n][s] as i64 * previous[src];
                }
                i_hid[n][s] = clamp16(acc);
            }
        }
        // hidden membranes and firing
        let mut fired = vec![0i64; h];
        for n in 0..h {
            let mut acc = decay(v_hid[n], cfg.dash_mem_hid[n] as i64);
            for s in 0..syn {
                acc += i_hid[n][s];
            }
            acc += cfg.bias_hid[n] as i64;
            let mut v = clamp16(acc);
            let th = cfg.threshold_hid[n] as i64;
            let mut count = 0;
            while v >= th && count < 31 {
                v -= th;
                count += 1;
            }
            v_hid[n] = v;
            fired[n] = count;
        }
        // alias routing
        let mut routed = fired.clone();
        for a in &cfg.aliases {
            routed[a.target] = (routed[a.target] + fired[a.source]).min(31);
        }
        // outputs
        let mut out_fired = vec![0i64; o];
        for k in 0..o {
            let mut acc = decay(i_out[k], cfg.dash_syn_out[k] as i64);
            for src in 0..h {
                acc += cfg.w_out[src][k] as i64 * routed[src];
            }
            i_out[k] = clamp16(acc);
            let mut v = clamp16(decay(v_out[k], cfg.dash_mem_out[k] as i64) + i_out[k] + cfg.bias_out[k] as i64);
            if v >= cfg.threshold_out[k] as i64 {
                v -= cfg.threshold_out[k] as i64;
                out_fired[k] = 1;
            }
            v_out[k] = v;
        }
        trace.push(OracleStep {
            v_hid: v_hid.clone(),
            i_hid: i_hid.clone(),
            spikes_hid: fired,
            v_out: v_out.clone(),
            i_out: i_out.clone(),
            spikes_out: out_fired,
        });
        previous = routed;
    }
    trace
}
