//! Context-aware gate decomposition for quantum circuit transpilation.
//!
//! Toffoli gates are decomposed by picking, from a library of equivalent
//! templates, the one that cancels or resynthesizes best against its
//! neighbors on the actual hardware topology. CNOTs are then lowered to
//! cross-resonance pulses by picking the template whose single-qubit corners
//! merge best with their surroundings.

pub mod basis;
pub mod circuit;
pub mod dag;
pub mod error;
pub mod native;
pub mod peephole;
pub mod pipeline;
pub mod qasm;
pub mod routing;
pub mod synth;
pub mod topology;
pub mod unitary;

pub use circuit::{Circuit, Gate, GateKind, Tag};
pub use error::{Error, Result};
