//! Acceptance suite: one PASS/FAIL line per criterion, with timing against
//! the criterion's runtime budget. Exits non-zero when any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{oracle_mismatches, random_config, random_raster, random_spec, Rng};
use xylo_core::harness::pipeline::{run_pipeline, PipelineOptions, ARTIFACTS};
use xylo_core::hwconfig::{Alias, InitialState};
use xylo_core::limits::{
    Limit, ValidationReport, MAX_HIDDEN_NEURONS, MAX_INPUT_CHANNELS, MAX_OUTPUT_NEURONS, STATE_MAX, THRESHOLD_MAX,
    WEIGHT_MAX, WEIGHT_MIN,
};
use xylo_core::quantize::Quantized;
use xylo_core::sim::{validate_recording, StateTraces};
use xylo_core::stimulus::raster_violations;
use xylo_core::{
    bitshift_decay, evolve, poisson_raster, quantize_channel, quantize_global, validate_config, FloatSpecification,
    HardwareConfig, InputRaster, QuantizedSpecification, Recording,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- criterion 1

fn base() -> HardwareConfig {
    HardwareConfig::zeros(0.001, 2, 2, 1, 1)
}

fn check(config: HardwareConfig) -> ValidationReport {
    validate_config(&config)
}

fn recording(hidden_spike: u8, output_spike: u8) -> Recording<i16> {
    Recording {
        steps: 1,
        hidden: 1,
        outputs: 1,
        synapses: 1,
        states: Some(StateTraces {
            hidden_v_mem: vec![0],
            hidden_i_syn: vec![0],
            hidden_spikes: vec![hidden_spike],
            output_v_mem: vec![0],
            output_i_syn: vec![0],
        }),
        output_spikes: vec![output_spike],
    }
}

fn raster_report(count: u8) -> ValidationReport {
    let mut r = InputRaster::zeros(2, 3);
    r.set(1, 2, count);
    ValidationReport {
        violations: raster_violations(&r),
        ..Default::default()
    }
}

fn with_state(f: impl FnOnce(&mut InitialState)) -> HardwareConfig {
    let mut c = base();
    let mut init = InitialState {
        v_mem_hid: vec![0; 2],
        i_syn_hid: vec![[0, 0]; 2],
        v_mem_out: vec![0],
        i_syn_out: vec![0],
    };
    f(&mut init);
    c.initial_state = Some(init);
    c
}

/// `(accepted case, rejected case)` for one limit row.
fn boundary_pair(limit: Limit) -> Vec<(ValidationReport, ValidationReport)> {
    let cfg = |f: &dyn Fn(&mut HardwareConfig)| {
        let mut c = base();
        f(&mut c);
        check(c)
    };
    match limit {
        Limit::InputChannels => vec![(
            check(HardwareConfig::zeros(0.001, MAX_INPUT_CHANNELS, 1, 1, 1)),
            check(HardwareConfig::zeros(0.001, MAX_INPUT_CHANNELS + 1, 1, 1, 1)),
        )],
        Limit::InputSpikesPerStep => vec![(raster_report(15), raster_report(16))],
        Limit::HiddenNeurons => vec![(
            check(HardwareConfig::zeros(0.001, 1, MAX_HIDDEN_NEURONS, 1, 1)),
            check(HardwareConfig::zeros(0.001, 1, MAX_HIDDEN_NEURONS + 1, 1, 1)),
        )],
        Limit::HiddenSpikesPerStep => vec![(
            validate_recording(&recording(31, 0)),
            validate_recording(&recording(32, 0)),
        )],
        Limit::HiddenInputSynapses => vec![(
            check(HardwareConfig::zeros(0.001, 1, 1, 1, 2)),
            check(HardwareConfig::zeros(0.001, 1, 1, 1, 3)),
        )],
        Limit::AliasTargets => vec![(
            cfg(&|c| c.aliases = vec![Alias { source: 0, target: 1 }]),
            cfg(&|c| c.aliases = vec![Alias { source: 0, target: 1 }, Alias { source: 0, target: 0 }]),
        )],
        Limit::OutputNeurons => vec![(
            check(HardwareConfig::zeros(0.001, 1, 1, MAX_OUTPUT_NEURONS, 1)),
            check(HardwareConfig::zeros(0.001, 1, 1, MAX_OUTPUT_NEURONS + 1, 1)),
        )],
        Limit::OutputSpikesPerStep => vec![(
            validate_recording(&recording(0, 1)),
            validate_recording(&recording(0, 2)),
        )],
        Limit::OutputInputSynapses => vec![(cfg(&|c| c.output_synapses = 1), cfg(&|c| c.output_synapses = 2))],
        Limit::WeightBitDepth => vec![
            (cfg(&|c| c.w_in[1][0][0] = WEIGHT_MAX), cfg(&|c| c.w_in[1][0][0] = 200)),
            (cfg(&|c| c.w_rec[0][1][0] = WEIGHT_MIN), cfg(&|c| c.w_rec[0][1][0] = WEIGHT_MIN - 1)),
            (cfg(&|c| c.w_out[1][0] = WEIGHT_MAX), cfg(&|c| c.w_out[1][0] = WEIGHT_MAX + 1)),
        ],
        Limit::SynapticStateBitDepth => vec![
            (
                check(with_state(|s| s.i_syn_hid[1][0] = STATE_MAX)),
                check(with_state(|s| s.i_syn_hid[1][0] = STATE_MAX + 1)),
            ),
            (
                check(with_state(|s| s.i_syn_out[0] = -32768)),
                check(with_state(|s| s.i_syn_out[0] = -32769)),
            ),
        ],
        Limit::MembraneStateBitDepth => vec![
            (cfg(&|c| c.bias_hid[0] = STATE_MAX), cfg(&|c| c.bias_hid[0] = STATE_MAX + 1)),
            (
                check(with_state(|s| s.v_mem_out[0] = -32768)),
                check(with_state(|s| s.v_mem_out[0] = -32769)),
            ),
        ],
        Limit::ThresholdBitDepth => vec![
            (cfg(&|c| c.threshold_hid[0] = THRESHOLD_MAX), cfg(&|c| c.threshold_hid[0] = THRESHOLD_MAX + 1)),
            (cfg(&|c| c.threshold_out[0] = 1), cfg(&|c| c.threshold_out[0] = 0)),
        ],
        Limit::DecayBitDepth => vec![
            (cfg(&|c| c.dash_syn_hid[0][0] = 15), cfg(&|c| c.dash_syn_hid[0][0] = 16)),
            (cfg(&|c| c.dash_mem_out[0] = 0), cfg(&|c| c.dash_mem_out[0] = -1)),
        ],
        Limit::MaxDecay => vec![(cfg(&|c| c.dash_mem_hid[1] = 15), cfg(&|c| c.dash_mem_hid[1] = 16))],
        Limit::LongestTimeConstant => {
            vec![(cfg(&|c| c.dash_syn_out[0] = 15), cfg(&|c| c.dash_syn_out[0] = 16))]
        }
    }
}

fn criterion_1() -> Outcome {
    let mut cases = 0;
    for limit in Limit::ALL {
        for (k, (ok, bad)) in boundary_pair(limit).into_iter().enumerate() {
            cases += 1;
            ensure(ok.is_empty(), || format!("{} case {k}: at-limit value rejected:\n{}", limit.id(), ok.message()))?;
            ensure(bad.has(limit), || format!("{} case {k}: over-limit value not reported under its row", limit.id()))?;
            ensure(bad.message().contains(limit.row_name()), || {
                format!("{} case {k}: message lacks {:?}", limit.id(), limit.row_name())
            })?;
        }
    }
    // a 17-channel network is refused before a configuration even exists
    let net = r#"[{"type":"linear","rows":17,"cols":2,"weights":{"init":"uniform","low":-1,"high":1,"seed":1}},
                  {"type":"lif","n":2,"tau_mem":0.02,"tau_syn":0.01,"threshold":1}]"#;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let err = run_pipeline(net, &PipelineOptions::default(), dir.path()).err().ok_or("17 inputs accepted")?;
    ensure(err.exit_code() == 2 && err.message.contains(Limit::InputChannels.row_name()), || {
        format!("17-input network: {err}")
    })?;
    Ok(format!(
        "{} of {} datasheet rows covered with {cases} boundary pairs (the table lists 16 rows)",
        Limit::ALL.len(),
        Limit::ALL.len()
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let mut rng = Rng::new(0x5eed_0002);
    let (mut total, mut values, mut with_alias, mut s2) = (0usize, 0usize, 0usize, 0usize);
    for k in 0..100 {
        let cfg = random_config(&mut rng, k % 2 == 0);
        let raster = random_raster(&mut rng, 100, cfg.channels);
        let rec = evolve(&cfg, &raster, true).map_err(|e| e.to_string())?;
        let bad = oracle_mismatches(&cfg, &raster, &rec);
        values += 100 * (cfg.hidden * (2 + cfg.synapses) + 3 * cfg.outputs);
        with_alias += usize::from(!cfg.aliases.is_empty());
        s2 += usize::from(cfg.synapses == 2);
        ensure(bad == 0, || format!("config {k}: {bad} values differ from the scalar oracle"))?;
        total += bad;
    }
    Ok(format!(
        "100 configs ({with_alias} with aliases, {s2} with S=2), {values} recorded values, {total} mismatches"
    ))
}

// ---------------------------------------------------------------- criterion 3

fn scaled(spec: &FloatSpecification, c: f64) -> FloatSpecification {
    let mut s = spec.clone();
    for w in s.w_in.iter_mut().chain(s.w_rec.iter_mut()).flatten().flatten() {
        *w *= c;
    }
    for w in s.w_out.iter_mut().flatten() {
        *w *= c;
    }
    for x in s.threshold_hid.iter_mut().chain(&mut s.bias_hid).chain(&mut s.threshold_out).chain(&mut s.bias_out) {
        *x *= c;
    }
    s
}

fn integer_part(q: &QuantizedSpecification) -> QuantizedSpecification {
    // everything but the recorded scales
    let mut q = q.clone();
    q.scales = xylo_core::Scales::Global { s_hidden: 1.0, s_out: 1.0 };
    q
}

fn bit_depths_ok(q: &QuantizedSpecification) -> Result<(), String> {
    let w_ok = |w: i32| (-128..=127).contains(&w);
    let all_w = q
        .w_in_q
        .iter()
        .chain(&q.w_rec_q)
        .flatten()
        .flatten()
        .chain(q.w_out_q.iter().flatten());
    ensure(all_w.clone().all(|&w| w_ok(w)), || "weight outside 8 bits".into())?;
    let th = q.threshold_hid_q.iter().chain(&q.threshold_out_q);
    ensure(th.clone().all(|&t| (1..=32767).contains(&t)), || "threshold outside [1, 32767]".into())?;
    let b = q.bias_hid_q.iter().chain(&q.bias_out_q);
    ensure(b.clone().all(|&x| (-32768..=32767).contains(&x)), || "bias outside 16 bits".into())?;
    let d = q
        .dash_mem_hid
        .iter()
        .chain(q.dash_syn_hid.iter().flatten())
        .chain(&q.dash_mem_out)
        .chain(&q.dash_syn_out);
    ensure(d.clone().all(|&x| (0..=15).contains(&x)), || "dash outside [0, 15]".into())?;
    let (_, valid, msg) = xylo_core::config_from_specification(q);
    ensure(valid, || format!("configuration invalid: {msg}"))
}

fn criterion_3() -> Outcome {
    let mut rng = Rng::new(0x5eed_0003);
    let mut saturated = 0usize;
    for k in 0..1000 {
        let spec = random_spec(&mut rng);
        let c = rng.real(1e-3, 1e3);
        let Quantized { spec: a, .. } = quantize_global(&spec).map_err(|e| e.to_string())?;
        let Quantized { spec: b, .. } = quantize_global(&scaled(&spec, c)).map_err(|e| e.to_string())?;
        ensure(integer_part(&a) == integer_part(&b), || format!("pair {k}: scaling by {c} changed the integers"))?;

        let Quantized { spec: ch, .. } = quantize_channel(&spec).map_err(|e| e.to_string())?;
        for i in 0..spec.hidden {
            let incoming = spec.w_in.iter().chain(&spec.w_rec).flat_map(|r| r[i].iter()).fold(0.0f64, |m, w| m.max(w.abs()));
            let q_max = ch.w_in_q.iter().chain(&ch.w_rec_q).flat_map(|r| r[i].iter()).map(|w| w.abs()).max().unwrap_or(0);
            if incoming > 0.0 {
                ensure(q_max == 127, || format!("spec {k}: hidden neuron {i} peaks at {q_max}"))?;
                saturated += 1;
            }
        }
        for o in 0..spec.outputs {
            let incoming = spec.w_out.iter().fold(0.0f64, |m, r| m.max(r[o].abs()));
            let q_max = ch.w_out_q.iter().map(|r| r[o].abs()).max().unwrap_or(0);
            if incoming > 0.0 {
                ensure(q_max == 127, || format!("spec {k}: output neuron {o} peaks at {q_max}"))?;
                saturated += 1;
            }
        }
        bit_depths_ok(&a).map_err(|e| format!("spec {k} global: {e}"))?;
        bit_depths_ok(&ch).map_err(|e| format!("spec {k} channel: {e}"))?;
    }
    Ok(format!("1000 scale pairs invariant, {saturated} neurons saturate at 127, all outputs within bit depths"))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let mut rng = Rng::new(0x5eed_0004);
    let states: Vec<i16> = (0..1000).map(|_| rng.int(-32768, 32767) as i16).collect();
    let mut iterations = 0u64;
    for dash in 0..=15u8 {
        for &v0 in &states {
            let mut v = v0;
            let mut steps = 0u32;
            while v != 0 {
                let next = bitshift_decay(v, dash);
                ensure(next.unsigned_abs() < v.unsigned_abs(), || format!("|v| did not shrink at v={v}, dash={dash}"))?;
                ensure(next == 0 || next.signum() == v.signum(), || format!("sign flipped at v={v}, dash={dash}"))?;
                v = next;
                steps += 1;
            }
            ensure(steps <= u32::from(v0.unsigned_abs()), || format!("{v0} took {steps} steps at dash={dash}"))?;
            iterations += u64::from(steps);
        }
    }
    let mut v = 1000i16;
    for t in 0..1000 {
        let next = bitshift_decay(v, 15);
        ensure(v - next == 1, || format!("dash 15 step {t}: {v} -> {next}"))?;
        v = next;
    }
    ensure(v == 0, || "dash 15 from 1000 did not reach 0 in 1000 steps".into())?;
    Ok(format!("16 dashes x 1000 states contract to 0 ({iterations} steps); dash 15 decays 1000 linearly"))
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let steps = 100_000;
    let raster = poisson_raster(&[100.0], steps, 0.01, 12345).map_err(|e| e.to_string())?;
    let mean = raster.counts().iter().map(|&c| f64::from(c)).sum::<f64>() / steps as f64;
    ensure((0.95..=1.05).contains(&mean), || format!("mean {mean} at lambda 1"))?;

    let hot = poisson_raster(&[1e6; 4], 1000, 1.0, 7).map_err(|e| e.to_string())?;
    let max = hot.counts().iter().copied().max().unwrap_or(0);
    ensure(max <= 15 && raster_violations(&hot).is_empty(), || format!("clamp exceeded: {max}"))?;

    let bytes = |r: &InputRaster| {
        let mut buf = Vec::new();
        r.write_csv(&mut buf).map(|_| buf).map_err(|e| e.to_string())
    };
    let again = poisson_raster(&[100.0], steps, 0.01, 12345).map_err(|e| e.to_string())?;
    ensure(bytes(&raster)? == bytes(&again)?, || "same seed produced different rasters".into())?;
    Ok(format!("mean {mean:.4} events/step at lambda 1; max {max} at lambda 1e6; rasters byte-identical"))
}

// ---------------------------------------------------------------- criterion 6

fn demo_options() -> PipelineOptions {
    PipelineOptions {
        seed: 42,
        ..PipelineOptions::default()
    }
}

fn criterion_6() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outcome = run_pipeline(&common::demo_network(), &demo_options(), dir.path()).map_err(|e| e.to_string())?;
    let golden = common::golden_hashes();
    ensure(golden.len() == ARTIFACTS.len(), || format!("{} golden hashes for {} artifacts", golden.len(), ARTIFACTS.len()))?;
    for (hash, name) in &golden {
        let bytes = std::fs::read(dir.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let got = common::sha256_hex(&bytes);
        ensure(&got == hash, || format!("{name}: sha256 {got}, golden {hash}"))?;
    }
    let bad = oracle_mismatches(&outcome.config, &outcome.raster, &outcome.int_recording);
    ensure(bad == 0, || format!("demo recording differs from the scalar oracle in {bad} values"))?;
    Ok(format!("{} artifacts match golden hashes; demo recording matches the oracle", golden.len()))
}

// ---------------------------------------------------------------- criterion 7

/// Regression bound on the demo's float-vs-int output spike difference.
const MAX_RELATIVE_OUTPUT_DIFF: f64 = 0.25;

fn criterion_7() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let outcome = run_pipeline(&common::demo_network(), &demo_options(), dir.path()).map_err(|e| e.to_string())?;
    let report = &outcome.comparison;
    ensure(report.is_finite(), || "comparison has non-finite entries".into())?;
    let rel = report.relative_output_spike_diff;
    ensure(rel <= MAX_RELATIVE_OUTPUT_DIFF, || format!("relative output spike difference {rel:.4} > {MAX_RELATIVE_OUTPUT_DIFF}"))?;
    Ok(format!(
        "output spikes float {} vs int {}: relative difference {rel:.4} <= {MAX_RELATIVE_OUTPUT_DIFF}",
        outcome.float_recording.total_output_spikes(),
        outcome.int_recording.total_output_spikes()
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Duration, fn() -> Outcome); 7] = [
        ("device limit boundaries", Duration::from_secs(1), criterion_1),
        ("integer simulator vs scalar oracle", Duration::from_secs(30), criterion_2),
        ("quantization properties", Duration::from_secs(10), criterion_3),
        ("bit-shift decay law", Duration::from_secs(1), criterion_4),
        ("stimulus statistics", Duration::from_secs(5), criterion_5),
        ("end-to-end golden pipeline", Duration::from_secs(5), criterion_6),
        ("float vs integer report", Duration::from_secs(5), criterion_7),
    ];
    let mut failed = 0;
    for (k, (name, budget, run)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let result = result.and_then(|detail| {
            if elapsed <= budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; took {elapsed:.2?}, budget {budget:?}"))
            }
        });
        match result {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail} [{elapsed:.2?}]", k + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {why} [{elapsed:.2?}]", k + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
