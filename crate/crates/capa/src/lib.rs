//! Capacity limits of two-user links served by continuous-aperture arrays.
//!
//! The crate computes channel gains and correlation factors for planar,
//! linear and discrete apertures, uplink and downlink capacities, zero-forcing
//! rates, duality transforms and capacity regions. Closed forms can be checked
//! against an adaptive integration oracle.

pub mod channel;
pub mod coupling;
pub mod downlink;
pub mod error;
pub mod geometry;
pub mod numerics;
pub mod region;
pub mod scenario;
pub mod sweep;
pub mod uplink;
pub mod verify;

pub use channel::ChannelPair;
pub use error::{Error, Result};
pub use geometry::{Aperture, DiscreteAperture, LinearAperture, PlanarAperture, UserPlacement, Wavelength};
pub use numerics::{ApertureGrid, ChebyshevRule, SampledField};
pub use region::{RatePoint, RegionPolygon};
pub use scenario::{scene_defaults, validate, Scene};
