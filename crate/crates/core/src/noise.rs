//! Seeded noise plumbing.
//!
//! Static mismatch realizations are drawn once per context as unit-variance
//! normals and scaled by the relevant sigma at the point of use. Temporal
//! noise comes from short-lived ChaCha streams keyed by (seed, source,
//! frame, index), so the order in which parallel workers evaluate things
//! never changes the result.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ARRAY_SIZE;

/// RNG type handed to every temporal-noise consumer.
pub type SampleRng = ChaCha8Rng;

/// Per-source enable switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseFlags {
    pub prnu: bool,
    pub pixel_offset: bool,
    pub pixel_temporal: bool,
    pub ds3_mismatch: bool,
    pub ds3_thermal: bool,
    pub ds_coupling: bool,
    pub mem_mismatch: bool,
    pub mem_thermal: bool,
    pub mac_mismatch: bool,
    pub mac_thermal: bool,
    pub tg_leakage: bool,
    pub comparator_offset: bool,
    pub cdac_mismatch: bool,
}

impl NoiseFlags {
    pub const fn none() -> Self {
        Self {
            prnu: false,
            pixel_offset: false,
            pixel_temporal: false,
            ds3_mismatch: false,
            ds3_thermal: false,
            ds_coupling: false,
            mem_mismatch: false,
            mem_thermal: false,
            mac_mismatch: false,
            mac_thermal: false,
            tg_leakage: false,
            comparator_offset: false,
            cdac_mismatch: false,
        }
    }

    /// Every characterized source on. TG leakage and CDAC mismatch stay off:
    /// both are corner studies rather than part of the nominal chip.
    pub const fn all() -> Self {
        Self {
            prnu: true,
            pixel_offset: true,
            pixel_temporal: true,
            ds3_mismatch: true,
            ds3_thermal: true,
            ds_coupling: true,
            mem_mismatch: true,
            mem_thermal: true,
            mac_mismatch: true,
            mac_thermal: true,
            tg_leakage: false,
            comparator_offset: true,
            cdac_mismatch: false,
        }
    }
}

impl Default for NoiseFlags {
    fn default() -> Self {
        Self::none()
    }
}

/// Temporal stream identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    PixelTemporal = 1,
    Ds3Thermal = 2,
    DsCoupling = 3,
    MemoryRead = 4,
    MacThermal = 5,
    Scene = 6,
    Trial = 7,
}

/// Number of SC-amplifier / ADC groups sharing the array columns.
pub const GROUPS: usize = 8;
/// Columns per group.
pub const GROUP_WIDTH: usize = 16;
/// Unit capacitors per MAC input (magnitude groups of 1, 2 and 4).
pub const UNITS_PER_INPUT: usize = 7;
/// Unit capacitors making up one shared feedback capacitor.
pub const FB_UNITS: usize = 64;
/// CDAC bits drawn for mismatch studies.
pub const CDAC_BITS: usize = 8;
/// Capacitors in the structural split-array CDAC (4 MSB, 4 LSB, dummy, bridge).
pub const SPLIT_CAPS: usize = 10;

/// Unit-variance normal draws fixed at context construction.
#[derive(Debug, Clone)]
pub struct StaticDraws {
    /// Photoresponse gain, one per pixel.
    pub prnu: Vec<f64>,
    /// Additive pixel offset, one per pixel.
    pub pixel_offset: Vec<f64>,
    /// DS3 unit offset, one per column.
    pub ds3_column: Vec<f64>,
    /// Source-follower offset, one per memory cell (16 x 128).
    pub mem_cell: Vec<f64>,
    /// MAC input unit caps, indexed `[group][input][unit]`.
    pub mac_input_caps: Vec<f64>,
    /// MAC feedback unit caps, indexed `[group][unit]`.
    pub mac_fb_caps: Vec<f64>,
    /// Comparator offset, one per ADC.
    pub comparator: Vec<f64>,
    /// Binary CDAC bit caps plus terminator, indexed `[adc][bit]` (9 per ADC).
    pub cdac_bits: Vec<f64>,
    /// Charge-sharing segments, indexed `[adc][segment]` (16 per ADC).
    pub cdac_segments: Vec<f64>,
    /// Structural split-array caps, indexed `[adc][cap]`.
    pub cdac_split: Vec<f64>,
}

fn normals(seed: u64, tag: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(&[seed, 0x5747_4943, tag]));
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

impl StaticDraws {
    fn generate(seed: u64) -> Self {
        let px = ARRAY_SIZE * ARRAY_SIZE;
        Self {
            prnu: normals(seed, 1, px),
            pixel_offset: normals(seed, 2, px),
            ds3_column: normals(seed, 3, ARRAY_SIZE),
            mem_cell: normals(seed, 4, 16 * ARRAY_SIZE),
            mac_input_caps: normals(seed, 5, GROUPS * GROUP_WIDTH * UNITS_PER_INPUT),
            mac_fb_caps: normals(seed, 6, GROUPS * FB_UNITS),
            comparator: normals(seed, 7, GROUPS),
            cdac_bits: normals(seed, 8, GROUPS * (CDAC_BITS + 1)),
            cdac_segments: normals(seed, 9, GROUPS * 16),
            cdac_split: normals(seed, 10, GROUPS * SPLIT_CAPS),
        }
    }
}

/// Seed, per-source switches, static draws and the current frame index.
#[derive(Debug, Clone)]
pub struct NoiseContext {
    seed: u64,
    flags: NoiseFlags,
    frame: u64,
    draws: Arc<StaticDraws>,
}

impl NoiseContext {
    pub fn new(seed: u64, flags: NoiseFlags) -> Self {
        Self {
            seed,
            flags,
            frame: 0,
            draws: Arc::new(StaticDraws::generate(seed)),
        }
    }

    /// Context with every source disabled.
    pub fn noiseless() -> Self {
        Self::new(0, NoiseFlags::none())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn flags(&self) -> &NoiseFlags {
        &self.flags
    }

    pub fn frame(&self) -> u64 {
        self.frame
    }

    pub fn draws(&self) -> &StaticDraws {
        &self.draws
    }

    /// Same chip (static draws shared), different temporal realization.
    pub fn with_frame(&self, frame: u64) -> Self {
        Self {
            frame,
            ..self.clone()
        }
    }

    pub fn with_flags(&self, flags: NoiseFlags) -> Self {
        Self {
            flags,
            ..self.clone()
        }
    }

    /// Temporal-noise stream for one (source, index) in the current frame.
    pub fn stream(&self, source: Stream, index: u64) -> SampleRng {
        ChaCha8Rng::seed_from_u64(mix(&[self.seed, source as u64, self.frame, index]))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a key tuple into a 64-bit seed.
pub fn mix(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| splitmix64(acc ^ p))
}

/// One standard-normal sample scaled by `sigma`.
pub fn gauss(rng: &mut SampleRng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}
