//! Signal-chain laboratory for oversampled DAC architectures: noise-shaping
//! modulators, time-interleaved polyphase output stages, unit-element banks
//! with static mismatch and dynamic element matching, plus the spectral
//! instrumentation (periodogram, band metrics, scope acquisition model)
//! used to compare them.
//!
//! The crate is deterministic end to end: clocks are exact rationals,
//! every stochastic choice flows from a caller-supplied seed through a
//! counter-based PRNG, and all measurements are pure functions of their
//! inputs.

pub mod analysis;
pub mod dem;
pub mod interleave;
pub mod modulator;
pub mod rate;
pub mod signal;

pub use rate::Rate;
pub use signal::SampledSignal;
