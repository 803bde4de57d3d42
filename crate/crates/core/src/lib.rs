//! Weighted Birkhoff averages for a family of volume-preserving maps of
//! `T^2 x R`, with the tools used to classify orbits and study the breakup
//! of rotational tori: resonance orders, Diophantine properties of cubic
//! frequency vectors, parameter sweeps, peak refinement and continuation of
//! individual tori to their critical perturbation.
//!
//! Everything that produces many independent orbits takes an
//! [`Execution`] argument. With the `parallel` feature (on by default) work
//! is spread over the rayon pool; results are identical either way.

pub mod birkhoff;
pub mod continuation;
pub mod error;
pub mod io;
pub mod map;
pub mod numtheory;
pub mod parallel;
pub mod resonance;
pub mod rng;
pub mod sweep;

pub use birkhoff::{rotation_vector_with_dig, AverageResult, WeightPlan};
pub use error::{Error, Result};
pub use map::{FrequencyVector, MapParams, OmegaBox, PhaseState};
pub use parallel::Execution;
pub use resonance::{resonance_order, OrderResult, ResonanceHit};
pub use sweep::{classify_orbit, GridSpec, OrbitClass, OrbitRecord};
