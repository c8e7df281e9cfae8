//! File formats: binary PGM images, filter banks and run configurations.

pub mod config;
pub mod filters;
pub mod pgm;
