//! Simulators: the bit-exact integer core model and its floating-point
//! reference, sharing one recording layout.

pub mod export;
pub mod float;
pub mod int;
mod recording;

use thiserror::Error;

pub use float::{decay_factor, evolve_float};
pub use int::{bitshift_decay, evolve, step, CoreState, StepOutput};
pub use recording::{
    validate_recording, FloatRecording, Recording, SimulationRecording, StateTraces,
};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimError {
    #[error("configuration is not sealed; validate it before simulation")]
    UnsealedConfig,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("input count {count} at t={t}, channel {channel} exceeds the per-step input limit")]
    InputLimit { t: usize, channel: usize, count: u8 },
    #[error("invalid specification: {0}")]
    Spec(String),
}
