//! Two-phase data offloading in a space-air-ground network: UAVs collect
//! data from IoT devices over NOMA uplinks, fly optimized tours, and offload
//! to LEO satellites chosen by link throughput.

pub mod collection;
pub mod energy;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod ground_link;
pub mod nelder_mead;
pub mod orbit;
pub mod scenario;
pub mod selection;
pub mod space_link;
pub mod streams;
pub mod tle;
pub mod trajectory;

pub use error::{Error, Result};
