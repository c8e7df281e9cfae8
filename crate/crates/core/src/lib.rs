//! Behavioral, noise-aware simulator of a mixed-signal near-sensor
//! convolutional imager: pixel array, delta-reset/downshift/downsample front
//! end, analog row memory, charge-domain MAC, SAR conversion, scheduling,
//! timing and an analytical performance model.

pub mod adc;
pub mod cli;
pub mod ds3;
pub mod error;
pub mod grid;
pub mod io;
pub mod mac;
pub mod memory;
pub mod noise;
pub mod params;
pub mod perf;
pub mod pipeline;
pub mod roi;
pub mod scenes;
pub mod sensor;

pub use error::{Error, Result};

/// Pixel array side length.
pub const ARRAY_SIZE: usize = 128;
/// Boltzmann constant (J/K).
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// 25 degrees Celsius in kelvin.
pub const ROOM_TEMPERATURE: f64 = 298.15;
