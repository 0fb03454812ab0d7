//! Open-quantum-system engine for a V-type emitter coupled to two driven
//! cavities: Lindblad steady states and time evolution, cascaded
//! wave-packet sources, closed-form cross-checks, and the sweep/detection
//! scenarios built on top of them.
//!
//! Rates are expressed in units of a reference rate κ, times in κ⁻¹.

pub mod analytic;
pub mod dynamics;
pub mod experiments;
pub mod hilbert;
pub mod model;

mod linalg;
mod sparse;
