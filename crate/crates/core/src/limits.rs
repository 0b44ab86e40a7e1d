//! Device limits of the Xylo-class core, one entry per datasheet row.

use std::fmt;

use serde::Serialize;

pub const MAX_INPUT_CHANNELS: usize = 16;
pub const MAX_INPUT_SPIKES: u32 = 15;
pub const MAX_HIDDEN_NEURONS: usize = 1000;
pub const MAX_HIDDEN_SPIKES: u32 = 31;
pub const MAX_HIDDEN_SYNAPSES: usize = 2;
pub const MAX_ALIAS_TARGETS: usize = 1;
pub const MAX_OUTPUT_NEURONS: usize = 8;
pub const MAX_OUTPUT_SPIKES: u32 = 1;
pub const MAX_OUTPUT_SYNAPSES: usize = 1;
pub const WEIGHT_BITS: u32 = 8;
pub const SYNAPTIC_STATE_BITS: u32 = 16;
pub const MEMBRANE_STATE_BITS: u32 = 16;
pub const THRESHOLD_BITS: u32 = 16;
pub const DECAY_BITS: u32 = 4;
pub const MAX_DECAY: i32 = 15;
/// Longest effective time constant, in units of `dt`.
pub const MAX_TIME_CONSTANT_STEPS: i64 = 32768;

pub const WEIGHT_MIN: i32 = -(1 << (WEIGHT_BITS - 1));
pub const WEIGHT_MAX: i32 = (1 << (WEIGHT_BITS - 1)) - 1;
pub const STATE_MIN: i32 = i16::MIN as i32;
pub const STATE_MAX: i32 = i16::MAX as i32;
pub const THRESHOLD_MIN: i32 = 1;
pub const THRESHOLD_MAX: i32 = (1 << (THRESHOLD_BITS - 1)) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Limit {
    InputChannels,
    InputSpikesPerStep,
    HiddenNeurons,
    HiddenSpikesPerStep,
    HiddenInputSynapses,
    AliasTargets,
    OutputNeurons,
    OutputSpikesPerStep,
    OutputInputSynapses,
    WeightBitDepth,
    SynapticStateBitDepth,
    MembraneStateBitDepth,
    ThresholdBitDepth,
    DecayBitDepth,
    MaxDecay,
    LongestTimeConstant,
}

impl Limit {
    pub const ALL: [Limit; 16] = [
        Limit::InputChannels,
        Limit::InputSpikesPerStep,
        Limit::HiddenNeurons,
        Limit::HiddenSpikesPerStep,
        Limit::HiddenInputSynapses,
        Limit::AliasTargets,
        Limit::OutputNeurons,
        Limit::OutputSpikesPerStep,
        Limit::OutputInputSynapses,
        Limit::WeightBitDepth,
        Limit::SynapticStateBitDepth,
        Limit::MembraneStateBitDepth,
        Limit::ThresholdBitDepth,
        Limit::DecayBitDepth,
        Limit::MaxDecay,
        Limit::LongestTimeConstant,
    ];

    /// Stable rule id, `L01`..`L16` in datasheet order.
    pub fn id(self) -> String {
        let idx = Self::ALL.iter().position(|&l| l == self).unwrap();
        format!("L{:02}", idx + 1)
    }

    /// Datasheet row label.
    pub fn row_name(self) -> &'static str {
        match self {
            Limit::InputChannels => "Max. input channels",
            Limit::InputSpikesPerStep => "Max. input spikes per time step",
            Limit::HiddenNeurons => "Max. hidden LIF neurons",
            Limit::HiddenSpikesPerStep => "Max. hidden neuron spikes per time step",
            Limit::HiddenInputSynapses => "Max. input synapses per hidden neuron",
            Limit::AliasTargets => "Max. alias targets (hidden neurons only)",
            Limit::OutputNeurons => "Max. output LIF neurons",
            Limit::OutputSpikesPerStep => "Max. output neuron spikes per time step",
            Limit::OutputInputSynapses => "Max. input synapses per output neuron",
            Limit::WeightBitDepth => "Weight bit-depth",
            Limit::SynapticStateBitDepth => "Synaptic state bit-depth",
            Limit::MembraneStateBitDepth => "Membrane state bit-depth",
            Limit::ThresholdBitDepth => "Threshold bit-depth",
            Limit::DecayBitDepth => "Bit-shift decay parameter bit-depth",
            Limit::MaxDecay => "Max. bit-shift decay value",
            Limit::LongestTimeConstant => "Longest effective time-constant",
        }
    }

    /// Allowed value or range, as shown in violation messages.
    pub fn allowed(self) -> String {
        match self {
            Limit::InputChannels => format!("<= {MAX_INPUT_CHANNELS}"),
            Limit::InputSpikesPerStep => format!("<= {MAX_INPUT_SPIKES}"),
            Limit::HiddenNeurons => format!("<= {MAX_HIDDEN_NEURONS}"),
            Limit::HiddenSpikesPerStep => format!("<= {MAX_HIDDEN_SPIKES}"),
            Limit::HiddenInputSynapses => format!("1..={MAX_HIDDEN_SYNAPSES}"),
            Limit::AliasTargets => format!("<= {MAX_ALIAS_TARGETS} hidden target per hidden neuron"),
            Limit::OutputNeurons => format!("<= {MAX_OUTPUT_NEURONS}"),
            Limit::OutputSpikesPerStep => format!("<= {MAX_OUTPUT_SPIKES}"),
            Limit::OutputInputSynapses => format!("= {MAX_OUTPUT_SYNAPSES}"),
            Limit::WeightBitDepth => format!("[{WEIGHT_MIN}, {WEIGHT_MAX}]"),
            Limit::SynapticStateBitDepth | Limit::MembraneStateBitDepth => {
                format!("[{STATE_MIN}, {STATE_MAX}]")
            }
            Limit::ThresholdBitDepth => format!("[{THRESHOLD_MIN}, {THRESHOLD_MAX}]"),
            Limit::DecayBitDepth => format!("[0, {}]", (1 << DECAY_BITS) - 1),
            Limit::MaxDecay => format!("<= {MAX_DECAY}"),
            Limit::LongestTimeConstant => format!("<= {MAX_TIME_CONSTANT_STEPS} dt"),
        }
    }

    pub fn violation(self, observed: i64, location: impl Into<String>) -> Violation {
        Violation {
            limit: self,
            observed,
            location: location.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub limit: Limit,
    pub observed: i64,
    pub location: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: observed {}, allowed {} ({})",
            self.limit.id(),
            self.limit.row_name(),
            self.observed,
            self.limit.allowed(),
            self.location
        )
    }
}

impl Serialize for Violation {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Violation", 5)?;
        s.serialize_field("id", &self.limit.id())?;
        s.serialize_field("row", self.limit.row_name())?;
        s.serialize_field("observed", &self.observed)?;
        s.serialize_field("allowed", &self.limit.allowed())?;
        s.serialize_field("location", &self.location)?;
        s.end()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Shape problems that prevent limit checks from running.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub structural: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty() && self.structural.is_empty()
    }

    pub fn has(&self, limit: Limit) -> bool {
        self.violations.iter().any(|v| v.limit == limit)
    }

    pub fn limits(&self) -> impl Iterator<Item = Limit> + '_ {
        self.violations.iter().map(|v| v.limit)
    }

    /// One line per violation; empty when valid.
    pub fn message(&self) -> String {
        self.structural
            .iter()
            .map(|s| format!("[structure] {s}"))
            .chain(self.violations.iter().map(ToString::to_string))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
