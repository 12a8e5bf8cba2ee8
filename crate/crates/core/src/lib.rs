//! Simulation and optimal control of statically exchange-coupled spin qubits.
//!
//! The crate models N spin-1/2 centers with always-on Heisenberg (or Ising)
//! exchange under radio-frequency driving, propagates them as closed systems
//! or with Markovian noise through a GKSL master equation, scores the results
//! with gate/state fidelities and concurrence, and synthesizes control pulses
//! with the Krotov method. The `scenario` module wires everything into named,
//! reproducible experiments driven by TOML configs.

pub mod error;
pub mod krotov;
pub mod metrics;
pub mod operator;
pub mod propagate;
pub mod pulse;
pub mod scenario;
pub mod spectrum;
pub mod spin;
pub mod units;

pub use error::{Error, Result};
pub use operator::{EigenDecomposition, Operator, State};
pub use pulse::{SampledPulse, TonePulse};
pub use spin::{InteractionKind, SpinSystem, TransitionTable, TwoQubitAnalytic};
