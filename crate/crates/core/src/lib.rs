//! Volumetric environment representation toolkit: synthetic scenes,
//! occupancy annotation, encoder sampling geometry, a volume-state
//! navigation policy, an episode simulator and navigation / perception
//! metrics.

pub mod annotation;
pub mod binio;
pub mod camera;
pub mod encoder;
pub mod error;
pub mod grid;
pub mod metrics;
pub mod params;
pub mod policy;
pub mod scene;
pub mod scene_io;
pub mod selfcheck;
pub mod shapes;
pub mod sim;
pub mod synth;
pub mod views;

pub use error::{Error, Result};
