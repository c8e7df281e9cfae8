//! Software baseline: block-mean downsampling and integer-weight convolution.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::perf::fmap_size;
use crate::params::SimParams;
use crate::pipeline::{Filter, FILTER_SIZE};

/// Noise-free voltage chain from a (downsampled) scene code to the
/// charge-shared node, ignoring swing limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NominalTransfer {
    /// Buffered memory voltage at code 0.
    pub buf_at_zero: f64,
    /// Buffered memory voltage per code step.
    pub buf_per_code: f64,
    /// Charge-sharing gain applied to a weighted sum of buffer voltages.
    pub share_gain: f64,
    pub v_cm: f64,
}

impl NominalTransfer {
    pub fn new(params: &SimParams, t_exp: f64) -> Self {
        let px = &params.pixel;
        let scene = &params.scene;
        let drop_at_zero = (px.i_dark + px.lux_to_current * scene.lx_min) * t_exp / px.c_pd;
        let drop_per_code = px.lux_to_current * (scene.lx_max - scene.lx_min) / 255.0 * t_exp / px.c_pd;
        let ratio = params.ds3.ratio();
        let a = params.memory.a_sf_mem;
        Self {
            buf_at_zero: a * (params.ds3.v_ref + ratio * drop_at_zero),
            buf_per_code: a * ratio * drop_per_code,
            share_gain: params.mac.c_u / params.mac.c_fb_total() / FILTER_SIZE as f64,
            v_cm: params.mac.v_cm,
        }
    }

    /// Node voltage for a reference value and the filter's weight sum.
    pub fn v_sh(&self, reference: f64, weight_sum: i32) -> f64 {
        self.v_cm + self.share_gain * (self.buf_at_zero * f64::from(weight_sum) + self.buf_per_code * reference)
    }
}

/// Block-mean downsampling by `ds`.
pub fn downsample(image: &Grid<u8>, ds: usize) -> Result<Grid<f64>> {
    if ds == 0 || image.rows() % ds != 0 || image.cols() % ds != 0 {
        return Err(Error::UnsupportedConfig(format!(
            "downsampling factor {ds} does not tile a {}x{} image",
            image.rows(),
            image.cols()
        )));
    }
    let n = (ds * ds) as f64;
    Ok(Grid::from_fn(image.rows() / ds, image.cols() / ds, |r, c| {
        let mut s = 0.0;
        for i in 0..ds {
            for j in 0..ds {
                s += f64::from(*image.get(r * ds + i, c * ds + j));
            }
        }
        s / n
    }))
}

/// Real-valued feature maps of `filters` over the downsampled image.
pub fn reference_convolution(
    image: &Grid<u8>,
    filters: &[Filter],
    ds: usize,
    stride: usize,
) -> Result<Vec<Grid<f64>>> {
    let n_f = fmap_size(ds, stride)?;
    let small = downsample(image, ds)?;
    if small.rows() < FILTER_SIZE + (n_f - 1) * stride || small.cols() < FILTER_SIZE + (n_f - 1) * stride {
        return Err(Error::Dimension {
            expected: format!("image of at least {} pixels per side after downsampling", FILTER_SIZE + (n_f - 1) * stride),
            got: format!("{}x{}", small.rows(), small.cols()),
        });
    }
    Ok(filters
        .iter()
        .map(|f| {
            Grid::from_fn(n_f, n_f, |pr, pc| {
                let (r0, c0) = (pr * stride, pc * stride);
                let mut acc = 0.0;
                for i in 0..FILTER_SIZE {
                    for j in 0..FILTER_SIZE {
                        acc += f64::from(f.weight(i, j).value()) * small.get(r0 + i, c0 + j);
                    }
                }
                acc
            })
        })
        .collect())
}
