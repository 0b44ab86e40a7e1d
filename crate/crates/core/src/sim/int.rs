//! Bit-exact integer model of the core.
//!
//! Per step, for every hidden neuron `i` and synapse channel `s`, in order:
//!
//! 1. `i_syn ← sat16(decay(i_syn, dash_syn) + Σ_c w_in·in + Σ_j w_rec·routed_prev)`
//! 2. `v_mem ← sat16(decay(v_mem, dash_mem) + Σ_s i_syn + bias)`
//! 3. `spikes = min(31, v_mem / threshold)` when `v_mem ≥ threshold`, and
//!    `v_mem -= spikes · threshold`
//! 4. alias routing: `routed = spikes`, then `routed[t] += spikes[i]` for each
//!    alias `i → t`, clamped to 31
//! 5. output neurons integrate `routed` through `w_out` the same way, firing at
//!    most once and subtracting one threshold.
//!
//! `routed` feeds the recurrent weights on the next step.

use crate::hwconfig::HardwareConfig;
use crate::limits::{MAX_HIDDEN_SPIKES, STATE_MAX, STATE_MIN};
use crate::stimulus::InputRaster;

use super::{Recording, SimError, SimulationRecording};

/// Bit-shift decay with a linear floor: `v - sign(v) * max(|v| >> dash, 1)`
/// for non-zero `v`. Never crosses zero.
#[inline]
pub fn bitshift_decay(v: i16, dash: u8) -> i16 {
    let v = i32::from(v);
    let mut d = v.abs().checked_shr(u32::from(dash)).unwrap_or(0);
    if d == 0 && v != 0 {
        d = 1;
    }
    (v - v.signum() * d) as i16
}

#[inline]
fn sat16(x: i32) -> i16 {
    x.clamp(STATE_MIN, STATE_MAX) as i16
}

/// Mutable neuron state of one evolution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreState {
    pub v_mem_hid: Vec<i16>,
    pub i_syn_hid: Vec<[i16; 2]>,
    pub v_mem_out: Vec<i16>,
    pub i_syn_out: Vec<i16>,
}

impl CoreState {
    /// The config's initial state, or all zeros.
    pub fn initial(config: &HardwareConfig) -> Self {
        match &config.initial_state {
            Some(init) => Self {
                v_mem_hid: init.v_mem_hid.iter().map(|&x| sat16(x)).collect(),
                i_syn_hid: init.i_syn_hid.iter().map(|s| s.map(sat16)).collect(),
                v_mem_out: init.v_mem_out.iter().map(|&x| sat16(x)).collect(),
                i_syn_out: init.i_syn_out.iter().map(|&x| sat16(x)).collect(),
            },
            None => Self {
                v_mem_hid: vec![0; config.hidden],
                i_syn_hid: vec![[0; 2]; config.hidden],
                v_mem_out: vec![0; config.outputs],
                i_syn_out: vec![0; config.outputs],
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutput {
    /// Each hidden neuron's own spike count.
    pub hidden_spikes: Vec<u8>,
    /// Hidden spike counts after alias routing.
    pub routed: Vec<u8>,
    pub output_spikes: Vec<u8>,
}

/// Advances `state` by one step.
pub fn step(
    config: &HardwareConfig,
    state: &mut CoreState,
    input: &[u8],
    prev_routed: &[u8],
) -> Result<StepOutput, SimError> {
    if !config.is_sealed() {
        return Err(SimError::UnsealedConfig);
    }
    if input.len() != config.channels {
        return Err(SimError::Shape(format!(
            "input has {} channels, config expects {}",
            input.len(),
            config.channels
        )));
    }
    if prev_routed.len() != config.hidden {
        return Err(SimError::Shape(format!(
            "previous spikes cover {} neurons, config has {}",
            prev_routed.len(),
            config.hidden
        )));
    }
    Ok(step_unchecked(config, &config.alias_targets(), state, input, prev_routed))
}

fn step_unchecked(
    config: &HardwareConfig,
    aliases: &[Option<usize>],
    state: &mut CoreState,
    input: &[u8],
    prev_routed: &[u8],
) -> StepOutput {
    let (h, s_count) = (config.hidden, config.synapses);

    // weighted input per (neuron, channel)
    let mut drive = vec![[0i32; 2]; h];
    for (c, &n) in input.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for (acc, w) in drive.iter_mut().zip(&config.w_in[c]) {
            for s in 0..s_count {
                acc[s] += w[s] * i32::from(n);
            }
        }
    }
    for (j, &n) in prev_routed.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for (acc, w) in drive.iter_mut().zip(&config.w_rec[j]) {
            for s in 0..s_count {
                acc[s] += w[s] * i32::from(n);
            }
        }
    }

    let mut spikes = vec![0u8; h];
    for i in 0..h {
        let mut syn_total = 0i32;
        for s in 0..s_count {
            let decayed = bitshift_decay(state.i_syn_hid[i][s], config.dash_syn_hid[i][s] as u8);
            let syn = sat16(i32::from(decayed) + drive[i][s]);
            state.i_syn_hid[i][s] = syn;
            syn_total += i32::from(syn);
        }
        let decayed = bitshift_decay(state.v_mem_hid[i], config.dash_mem_hid[i] as u8);
        let v = sat16(i32::from(decayed) + syn_total + config.bias_hid[i]);
        let th = config.threshold_hid[i];
        let v = i32::from(v);
        if v >= th {
            let n = (v / th).min(MAX_HIDDEN_SPIKES as i32);
            spikes[i] = n as u8;
            state.v_mem_hid[i] = (v - n * th) as i16;
        } else {
            state.v_mem_hid[i] = v as i16;
        }
    }

    let mut routed = spikes.clone();
    for (i, target) in aliases.iter().enumerate() {
        if let Some(t) = *target {
            routed[t] = (u32::from(routed[t]) + u32::from(spikes[i])).min(MAX_HIDDEN_SPIKES) as u8;
        }
    }

    let o_count = config.outputs;
    let mut out_drive = vec![0i32; o_count];
    for (j, &n) in routed.iter().enumerate() {
        if n == 0 {
            continue;
        }
        for (acc, &w) in out_drive.iter_mut().zip(&config.w_out[j]) {
            *acc += w * i32::from(n);
        }
    }
    let mut output_spikes = vec![0u8; o_count];
    for o in 0..o_count {
        let decayed = bitshift_decay(state.i_syn_out[o], config.dash_syn_out[o] as u8);
        let syn = sat16(i32::from(decayed) + out_drive[o]);
        state.i_syn_out[o] = syn;
        let decayed = bitshift_decay(state.v_mem_out[o], config.dash_mem_out[o] as u8);
        let v = i32::from(sat16(i32::from(decayed) + i32::from(syn) + config.bias_out[o]));
        let th = config.threshold_out[o];
        if v >= th {
            output_spikes[o] = 1;
            state.v_mem_out[o] = (v - th) as i16;
        } else {
            state.v_mem_out[o] = v as i16;
        }
    }

    StepOutput {
        hidden_spikes: spikes,
        routed,
        output_spikes,
    }
}

/// Runs `raster` through the core from its initial state.
pub fn evolve(
    config: &HardwareConfig,
    raster: &InputRaster,
    record: bool,
) -> Result<SimulationRecording, SimError> {
    if !config.is_sealed() {
        return Err(SimError::UnsealedConfig);
    }
    if raster.channels() != config.channels {
        return Err(SimError::Shape(format!(
            "raster has {} channels, config expects {}",
            raster.channels(),
            config.channels
        )));
    }
    if let Some((t, c, n)) = raster.first_over_limit() {
        return Err(SimError::InputLimit { t, channel: c, count: n });
    }
    let (h, o, s) = (config.hidden, config.outputs, config.synapses);
    let aliases = config.alias_targets();
    let mut state = CoreState::initial(config);
    let mut rec = Recording::with_capacity(raster.steps(), h, o, s, record);
    let mut routed = vec![0u8; h];
    for t in 0..raster.steps() {
        let out = step_unchecked(config, &aliases, &mut state, raster.row(t), &routed);
        if let Some(st) = rec.states.as_mut() {
            st.hidden_v_mem.extend_from_slice(&state.v_mem_hid);
            st.hidden_i_syn
                .extend(state.i_syn_hid.iter().flat_map(|x| x[..s].iter().copied()));
            st.hidden_spikes.extend_from_slice(&out.hidden_spikes);
            st.output_v_mem.extend_from_slice(&state.v_mem_out);
            st.output_i_syn.extend_from_slice(&state.i_syn_out);
        }
        rec.output_spikes.extend_from_slice(&out.output_spikes);
        rec.steps += 1;
        routed = out.routed;
    }
    Ok(rec)
}
