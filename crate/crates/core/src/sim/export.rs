//! Recording export: long-format CSV, JSON summary and plot-data tables.
//!
//! The recording CSV has header `t,kind,index,channel,v_mem,i_syn,spikes` with
//! one row per hidden neuron and synapse channel and one row per output neuron
//! (channel 0) at every step. When states were not recorded, only output rows
//! are written and the `v_mem`/`i_syn` fields are empty.

use std::fmt::Display;
use std::io::{Read, Write};

use serde::Serialize;

use super::{Recording, StateTraces};
use crate::ParseError;

pub const RECORDING_HEADER: [&str; 7] = ["t", "kind", "index", "channel", "v_mem", "i_syn", "spikes"];

fn csv_err(e: csv::Error) -> std::io::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io,
        other => std::io::Error::other(format!("{other:?}")),
    }
}

pub fn write_recording_csv<V: Copy + Display, W: Write>(rec: &Recording<V>, writer: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORDING_HEADER).map_err(csv_err)?;
    for t in 0..rec.steps {
        if let Some(st) = &rec.states {
            for i in 0..rec.hidden {
                let v = st.hidden_v_mem[t * rec.hidden + i].to_string();
                let n = st.hidden_spikes[t * rec.hidden + i].to_string();
                for s in 0..rec.synapses {
                    let syn = st.hidden_i_syn[(t * rec.hidden + i) * rec.synapses + s].to_string();
                    w.write_record([&t.to_string(), "hidden", &i.to_string(), &s.to_string(), &v, &syn, &n])
                        .map_err(csv_err)?;
                }
            }
        }
        for o in 0..rec.outputs {
            let (v, syn) = match &rec.states {
                Some(st) => (
                    st.output_v_mem[t * rec.outputs + o].to_string(),
                    st.output_i_syn[t * rec.outputs + o].to_string(),
                ),
                None => (String::new(), String::new()),
            };
            let n = rec.output_spike(t, o).to_string();
            w.write_record([&t.to_string(), "output", &o.to_string(), "0", &v, &syn, &n])
                .map_err(csv_err)?;
        }
    }
    w.flush()
}

pub fn recording_csv_string<V: Copy + Display>(rec: &Recording<V>) -> String {
    let mut buf = Vec::new();
    write_recording_csv(rec, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

struct Row {
    t: usize,
    hidden: bool,
    index: usize,
    channel: usize,
    state: Option<(f64, f64)>,
    spikes: u8,
}

/// Reads a recording CSV back, with real-valued states.
pub fn read_recording_csv<R: Read>(reader: R) -> Result<Recording<f64>, ParseError> {
    const CTX: &str = "recording CSV";
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = r.headers().map_err(|e| ParseError::new(CTX, e.to_string()).at_line(1))?;
    if header.iter().ne(RECORDING_HEADER) {
        return Err(ParseError::new(
            CTX,
            format!("expected header {:?}, found {:?}", RECORDING_HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        )
        .at_line(1));
    }
    let mut rows = Vec::new();
    for (k, record) in r.records().enumerate() {
        let line = k + 2;
        let record = record.map_err(|e| ParseError::new(CTX, e.to_string()).at_line(line))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let num = |i: usize| -> Result<usize, ParseError> {
            field(i)
                .parse()
                .map_err(|_| ParseError::new(CTX, format!("column {}: expected non-negative integer, got {:?}", RECORDING_HEADER[i], field(i))).at_line(line))
        };
        let real = |i: usize| -> Result<f64, ParseError> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| ParseError::new(CTX, format!("column {}: expected a finite number, got {:?}", RECORDING_HEADER[i], field(i))).at_line(line))
        };
        let hidden = match field(1) {
            "hidden" => true,
            "output" => false,
            other => return Err(ParseError::new(CTX, format!("unknown kind {other:?}")).at_line(line)),
        };
        let state = if field(4).is_empty() && field(5).is_empty() {
            None
        } else {
            Some((real(4)?, real(5)?))
        };
        let spikes = u8::try_from(num(6)?)
            .map_err(|_| ParseError::new(CTX, "spike count out of range").at_line(line))?;
        rows.push(Row {
            t: num(0)?,
            hidden,
            index: num(2)?,
            channel: num(3)?,
            state,
            spikes,
        });
    }

    let steps = rows.iter().map(|r| r.t + 1).max().unwrap_or(0);
    let dim = |hidden: bool, f: fn(&Row) -> usize| rows.iter().filter(|r| r.hidden == hidden).map(|r| f(r) + 1).max().unwrap_or(0);
    let (h, o) = (dim(true, |r| r.index), dim(false, |r| r.index));
    let s = dim(true, |r| r.channel).max(1);
    let recorded = h > 0 || rows.iter().any(|r| r.state.is_some());
    if recorded && rows.iter().any(|r| r.state.is_none()) {
        return Err(ParseError::new(CTX, "some rows carry states and others do not"));
    }
    let expected = steps * (h * s + o);
    if rows.len() != expected {
        return Err(ParseError::new(
            CTX,
            format!("expected {expected} rows for {steps} steps, H={h}, S={s}, O={o}; found {}", rows.len()),
        ));
    }

    let mut rec = Recording::<f64>::with_capacity(steps, h, o, s, recorded);
    rec.steps = steps;
    rec.output_spikes = vec![0; steps * o];
    if let Some(st) = rec.states.as_mut() {
        *st = StateTraces {
            hidden_v_mem: vec![0.0; steps * h],
            hidden_i_syn: vec![0.0; steps * h * s],
            hidden_spikes: vec![0; steps * h],
            output_v_mem: vec![0.0; steps * o],
            output_i_syn: vec![0.0; steps * o],
        };
    }
    let mut seen = vec![false; expected];
    for row in &rows {
        let slot = if row.hidden {
            (row.t * h + row.index) * s + row.channel
        } else {
            if row.channel != 0 {
                return Err(ParseError::new(CTX, format!("output row at t={} has channel {}", row.t, row.channel)));
            }
            steps * h * s + row.t * o + row.index
        };
        if std::mem::replace(&mut seen[slot], true) {
            return Err(ParseError::new(CTX, format!("duplicate row t={} index={} channel={}", row.t, row.index, row.channel)));
        }
        if row.hidden {
            let st = rec.states.as_mut().expect("hidden rows imply recorded states");
            let (v, i) = row.state.expect("checked above");
            st.hidden_v_mem[row.t * h + row.index] = v;
            st.hidden_i_syn[slot] = i;
            st.hidden_spikes[row.t * h + row.index] = row.spikes;
        } else {
            rec.output_spikes[row.t * o + row.index] = row.spikes;
            if let (Some(st), Some((v, i))) = (rec.states.as_mut(), row.state) {
                st.output_v_mem[row.t * o + row.index] = v;
                st.output_i_syn[row.t * o + row.index] = i;
            }
        }
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RecordingSummary {
    pub steps: usize,
    /// Own (pre-alias) spike totals; absent when states were not recorded.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_total_spikes: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hidden_first_spike: Option<Vec<Option<usize>>>,
    pub output_total_spikes: Vec<u64>,
    pub output_first_spike: Vec<Option<usize>>,
}

fn totals(spikes: &[u8], steps: usize, n: usize) -> (Vec<u64>, Vec<Option<usize>>) {
    let mut total = vec![0u64; n];
    let mut first = vec![None; n];
    for t in 0..steps {
        for i in 0..n {
            let c = spikes[t * n + i];
            if c > 0 {
                total[i] += u64::from(c);
                first[i].get_or_insert(t);
            }
        }
    }
    (total, first)
}

pub fn summarize<V>(rec: &Recording<V>) -> RecordingSummary {
    let (hidden_total, hidden_first) = match &rec.states {
        Some(st) => {
            let (a, b) = totals(&st.hidden_spikes, rec.steps, rec.hidden);
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let (output_total_spikes, output_first_spike) = totals(&rec.output_spikes, rec.steps, rec.outputs);
    RecordingSummary {
        steps: rec.steps,
        hidden_total_spikes: hidden_total,
        hidden_first_spike: hidden_first,
        output_total_spikes,
        output_first_spike,
    }
}

pub fn summary_json<V>(rec: &Recording<V>) -> String {
    let mut s = serde_json::to_string_pretty(&summarize(rec)).expect("summary serializes");
    s.push('\n');
    s
}

/// Sparse spike raster: `t,kind,index,count`, non-zero counts only.
pub fn plot_spikes_csv<V>(rec: &Recording<V>) -> String {
    let mut out = String::from("t,kind,index,count\n");
    for t in 0..rec.steps {
        if let Some(st) = &rec.states {
            for i in 0..rec.hidden {
                let c = st.hidden_spikes[t * rec.hidden + i];
                if c > 0 {
                    out.push_str(&format!("{t},hidden,{i},{c}\n"));
                }
            }
        }
        for o in 0..rec.outputs {
            let c = rec.output_spikes[t * rec.outputs + o];
            if c > 0 {
                out.push_str(&format!("{t},output,{o},{c}\n"));
            }
        }
    }
    out
}

/// Wide membrane table: `t,h0..,o0..`.
pub fn plot_membrane_csv<V: Copy + Display>(rec: &Recording<V>) -> String {
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((0..rec.hidden).map(|i| format!("h{i}")));
    cols.extend((0..rec.outputs).map(|o| format!("o{o}")));
    let mut out = cols.join(",") + "\n";
    if let Some(st) = &rec.states {
        for t in 0..rec.steps {
            let mut row = vec![t.to_string()];
            row.extend(st.hidden_v_mem[t * rec.hidden..(t + 1) * rec.hidden].iter().map(ToString::to_string));
            row.extend(st.output_v_mem[t * rec.outputs..(t + 1) * rec.outputs].iter().map(ToString::to_string));
            out += &(row.join(",") + "\n");
        }
    }
    out
}

/// Wide synaptic table: `t,h0s0,h0s1..,o0..`.
pub fn plot_synaptic_csv<V: Copy + Display>(rec: &Recording<V>) -> String {
    let mut cols: Vec<String> = vec!["t".into()];
    for i in 0..rec.hidden {
        cols.extend((0..rec.synapses).map(|s| format!("h{i}s{s}")));
    }
    cols.extend((0..rec.outputs).map(|o| format!("o{o}")));
    let mut out = cols.join(",") + "\n";
    if let Some(st) = &rec.states {
        let width = rec.hidden * rec.synapses;
        for t in 0..rec.steps {
            let mut row = vec![t.to_string()];
            row.extend(st.hidden_i_syn[t * width..(t + 1) * width].iter().map(ToString::to_string));
            row.extend(st.output_i_syn[t * rec.outputs..(t + 1) * rec.outputs].iter().map(ToString::to_string));
            out += &(row.join(",") + "\n");
        }
    }
    out
}
