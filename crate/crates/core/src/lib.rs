//! Spin-coherence simulation of NV-center sensors under CPMG dynamical
//! decoupling, and fingerprint-library positioning of a remote electron spin
//! from the coherence dips of several sensors.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation on immutable inputs; file formats, configuration and the
//! parallel drivers live in the `nvloc` crate.
//!
//! Units are fixed throughout: lengths in nm, times in μs, fields in gauss,
//! and every frequency or coupling is an *angular* frequency in rad/μs.
//! Published linear values (MHz, MHz/G) go through [`units::angular`] on the
//! way in.

#![no_std]
// `num_traits::Float` provides f64 math without std. When another crate in the
// build links std (tests, the CLI), the inherent methods shadow it.
#![allow(unused_imports)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bath;
pub mod coherence;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod nv;
pub mod positioning;
pub mod sequence;
pub mod units;

pub use error::{Error, Result};
pub use geometry::Vec3;

/// Version string recorded in library provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
