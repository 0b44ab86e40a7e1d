//! Floating-point reference model of the mapped network.
//!
//! Same step structure as the integer core, but each state decays by
//! `α = 1 − 2^(−dash)` with `dash` derived from the time constant exactly as
//! quantization derives it, with no linear floor and no saturation. Any
//! divergence from the integer model is therefore due to weight rounding and
//! state saturation only.

use crate::limits::{MAX_HIDDEN_SPIKES, MAX_OUTPUT_SPIKES};
use crate::mapper::FloatSpecification;
use crate::quantize::tau_to_dash;
use crate::stimulus::InputRaster;

use super::{FloatRecording, Recording, SimError};

/// `1 − 2^(−dash)` for the dash that `tau` quantizes to.
pub fn decay_factor(tau: f64, dt: f64) -> Result<f64, SimError> {
    let dash = tau_to_dash(tau, dt).map_err(|e| SimError::Spec(e.to_string()))?;
    Ok(1.0 - (-f64::from(dash)).exp2())
}

fn fire(v: &mut f64, threshold: f64, clamp: u32) -> u8 {
    if *v >= threshold {
        let n = (*v / threshold).floor().min(f64::from(clamp));
        *v -= n * threshold;
        n as u8
    } else {
        0
    }
}

pub fn evolve_float(
    spec: &FloatSpecification,
    raster: &InputRaster,
    record: bool,
) -> Result<FloatRecording, SimError> {
    spec.check().map_err(|e| SimError::Spec(e.0))?;
    if raster.channels() != spec.channels {
        return Err(SimError::Shape(format!(
            "raster has {} channels, specification expects {}",
            raster.channels(),
            spec.channels
        )));
    }
    let (h, o, s_count, dt) = (spec.hidden, spec.outputs, spec.synapses, spec.dt);
    if let Some(i) = spec.threshold_hid.iter().position(|&t| t.is_nan() || t <= 0.0) {
        return Err(SimError::Spec(format!("threshold_hid[{i}] must be positive")));
    }
    if let Some(i) = spec.threshold_out.iter().position(|&t| t.is_nan() || t <= 0.0) {
        return Err(SimError::Spec(format!("threshold_out[{i}] must be positive")));
    }

    let alpha_mem_hid = spec
        .tau_mem_hid
        .iter()
        .map(|&t| decay_factor(t, dt))
        .collect::<Result<Vec<_>, _>>()?;
    let mut alpha_syn_hid = vec![[0.0; 2]; h];
    for (a, taus) in alpha_syn_hid.iter_mut().zip(&spec.tau_syn_hid) {
        for s in 0..s_count {
            a[s] = decay_factor(taus[s], dt)?;
        }
    }
    let alpha_mem_out = spec
        .tau_mem_out
        .iter()
        .map(|&t| decay_factor(t, dt))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha_syn_out = spec
        .tau_syn_out
        .iter()
        .map(|&t| decay_factor(t, dt))
        .collect::<Result<Vec<_>, _>>()?;

    let mut v_hid = vec![0.0f64; h];
    let mut i_hid = vec![[0.0f64; 2]; h];
    let mut v_out = vec![0.0f64; o];
    let mut i_out = vec![0.0f64; o];
    let mut routed = vec![0u8; h];
    let mut rec: FloatRecording = Recording::with_capacity(raster.steps(), h, o, s_count, record);

    for t in 0..raster.steps() {
        let mut drive = vec![[0.0f64; 2]; h];
        for (c, &n) in raster.row(t).iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (acc, w) in drive.iter_mut().zip(&spec.w_in[c]) {
                for s in 0..s_count {
                    acc[s] += w[s] * f64::from(n);
                }
            }
        }
        for (j, &n) in routed.iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (acc, w) in drive.iter_mut().zip(&spec.w_rec[j]) {
                for s in 0..s_count {
                    acc[s] += w[s] * f64::from(n);
                }
            }
        }

        let mut spikes = vec![0u8; h];
        for i in 0..h {
            let mut total = 0.0;
            for s in 0..s_count {
                i_hid[i][s] = alpha_syn_hid[i][s] * i_hid[i][s] + drive[i][s];
                total += i_hid[i][s];
            }
            v_hid[i] = alpha_mem_hid[i] * v_hid[i] + total + spec.bias_hid[i];
            spikes[i] = fire(&mut v_hid[i], spec.threshold_hid[i], MAX_HIDDEN_SPIKES);
        }

        let mut next_routed = spikes.clone();
        for (i, target) in spec.aliases.iter().enumerate() {
            if let Some(tg) = *target {
                next_routed[tg] =
                    (u32::from(next_routed[tg]) + u32::from(spikes[i])).min(MAX_HIDDEN_SPIKES) as u8;
            }
        }

        let mut out_drive = vec![0.0f64; o];
        for (j, &n) in next_routed.iter().enumerate() {
            if n == 0 {
                continue;
            }
            for (acc, &w) in out_drive.iter_mut().zip(&spec.w_out[j]) {
                *acc += w * f64::from(n);
            }
        }
        let mut out_spikes = vec![0u8; o];
        for k in 0..o {
            i_out[k] = alpha_syn_out[k] * i_out[k] + out_drive[k];
            v_out[k] = alpha_mem_out[k] * v_out[k] + i_out[k] + spec.bias_out[k];
            out_spikes[k] = fire(&mut v_out[k], spec.threshold_out[k], MAX_OUTPUT_SPIKES);
        }

        if let Some(st) = rec.states.as_mut() {
            st.hidden_v_mem.extend_from_slice(&v_hid);
            st.hidden_i_syn
                .extend(i_hid.iter().flat_map(|x| x[..s_count].iter().copied()));
            st.hidden_spikes.extend_from_slice(&spikes);
            st.output_v_mem.extend_from_slice(&v_out);
            st.output_i_syn.extend_from_slice(&i_out);
        }
        rec.output_spikes.extend_from_slice(&out_spikes);
        rec.steps += 1;
        routed = next_routed;
    }
    Ok(rec)
}
