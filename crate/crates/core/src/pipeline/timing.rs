//! Exposure/convolution timing.
//!
//! A slot costs 16 psum steps plus one conversion of `bits` cycles. The psum
//! step, the bit cycle and the per-frame overhead are calibration constants
//! solved from three measured frame rates: the exposure-limited ceiling, the
//! dense 8b configuration and the 16-filter 1b detector.

use crate::error::{Error, Result};
use crate::pipeline::schedule::slots_per_patch_row;
use crate::pipeline::{ConvConfig, ExposureSchedule};
use crate::perf::fmap_size;

/// Exposure used by every calibration anchor (s).
pub const ANCHOR_EXPOSURE: f64 = 12.5e-3;
/// Frame rate when exposure dominates.
pub const CEILING_FPS: f64 = 79.7;
/// ds=1, S=2, 4 filters, 8b; runs sequentially.
pub const DENSE_FPS: f64 = 18.2;
/// ds=2, S=2, 16 filters, 1b; runs sequentially.
pub const DETECTOR_FPS: f64 = 27.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingModel {
    /// One row psum (s).
    pub t_psum: f64,
    /// One SAR bit cycle (s).
    pub t_bit: f64,
    /// Fixed per-frame cost (s).
    pub t_overhead: f64,
}

impl TimingModel {
    pub fn calibrated() -> Self {
        let t_overhead = 1.0 / CEILING_FPS - ANCHOR_EXPOSURE;
        // Slots per frame: 57 rows x 8 slots x 4 filters, 25 rows x 4 slots x 16 filters.
        let dense = (1.0 / DENSE_FPS - ANCHOR_EXPOSURE - t_overhead) / 1824.0;
        let detector = (1.0 / DETECTOR_FPS - ANCHOR_EXPOSURE - t_overhead) / 1600.0;
        // dense = 16 t_psum + 8 t_bit, detector = 16 t_psum + t_bit.
        let t_bit = (dense - detector) / 7.0;
        let t_psum = (detector - t_bit) / 16.0;
        Self {
            t_psum,
            t_bit,
            t_overhead,
        }
    }

    pub fn without_overhead(self) -> Self {
        Self {
            t_overhead: 0.0,
            ..self
        }
    }

    pub fn slot_time(&self, bits: u32) -> f64 {
        16.0 * self.t_psum + f64::from(bits) * self.t_bit
    }

    /// Convolution time of one frame.
    pub fn t_conv(&self, cfg: &ConvConfig) -> Result<f64> {
        let rows = fmap_size(cfg.ds, cfg.stride)?;
        let slots = rows * slots_per_patch_row(cfg.ds, cfg.stride)? * cfg.n_filt;
        Ok(slots as f64 * self.slot_time(cfg.fmap_bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameTiming {
    pub fps: f64,
    pub t_conv: f64,
    pub period: f64,
    /// Schedule actually executed.
    pub executed: ExposureSchedule,
    /// Overlap with convolution longer than exposure, which the silicon
    /// controller does not support.
    pub beyond_silicon: bool,
}

pub fn frame_timing(cfg: &ConvConfig, model: &TimingModel) -> Result<FrameTiming> {
    if !(cfg.t_exp > 0.0) {
        return Err(Error::Precondition(format!("exposure must be positive, got {}", cfg.t_exp)));
    }
    let t_conv = model.t_conv(cfg)?;
    let sequential = cfg.t_exp + t_conv + model.t_overhead;
    let (period, executed, beyond_silicon) = match cfg.schedule {
        ExposureSchedule::Sequential => (sequential, ExposureSchedule::Sequential, false),
        ExposureSchedule::Parallel if t_conv <= cfg.t_exp => {
            (cfg.t_exp + model.t_overhead, ExposureSchedule::Parallel, false)
        }
        ExposureSchedule::Parallel if cfg.allow_beyond_silicon => (
            t_conv.max(cfg.t_exp) + model.t_overhead,
            ExposureSchedule::Parallel,
            true,
        ),
        ExposureSchedule::Parallel => (sequential, ExposureSchedule::Sequential, false),
    };
    Ok(FrameTiming {
        fps: 1.0 / period,
        t_conv,
        period,
        executed,
        beyond_silicon,
    })
}
