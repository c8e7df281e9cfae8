//! DS3 column unit: delta-reset sampling, voltage downshift and block averaging.

use crate::error::{Error, Result};
use crate::noise::{gauss, NoiseContext, SampleRng, Stream};
use crate::sensor::RawPixelFrame;
use crate::{ARRAY_SIZE, BOLTZMANN, ROOM_TEMPERATURE};

/// Rounded downshift ratio quoted for the capacitor pair.
pub const ROUNDED_RATIO: f64 = 0.45;

#[derive(Debug, Clone, PartialEq)]
pub struct Ds3Params {
    /// Sampling capacitance (F).
    pub c_s: f64,
    /// Feedback capacitance (F).
    pub c_fb: f64,
    /// Output reference level (V).
    pub v_ref: f64,
    /// Amplifier common mode (V).
    pub v_cm: f64,
    /// Static per-column offset (V).
    pub mismatch_sigma: f64,
    /// Additive error on each downsampled output (V).
    pub ds_coupling_sigma: f64,
    /// Use 0.45 instead of the exact capacitor ratio.
    pub force_rounded_ratio: bool,
    /// Kelvin.
    pub temperature: f64,
}

impl Default for Ds3Params {
    fn default() -> Self {
        Self {
            c_s: 26e-15,
            c_fb: 58e-15,
            v_ref: 0.6,
            v_cm: 1.2,
            mismatch_sigma: 2.2e-3,
            ds_coupling_sigma: 10e-3,
            force_rounded_ratio: false,
            temperature: ROOM_TEMPERATURE,
        }
    }
}

impl Ds3Params {
    pub fn ratio(&self) -> f64 {
        if self.force_rounded_ratio {
            ROUNDED_RATIO
        } else {
            self.c_s / self.c_fb
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.c_s / self.c_fb;
        if !(self.c_s > 0.0 && self.c_fb > 0.0) || !(r > 0.0 && r <= 1.0) {
            return Err(Error::Precondition(format!(
                "ds3 params: capacitor ratio must lie in (0, 1], got {r}"
            )));
        }
        if !(self.v_ref < self.v_cm) {
            return Err(Error::Precondition("ds3 params: v_ref must be below v_cm".into()));
        }
        if !(self.mismatch_sigma >= 0.0 && self.ds_coupling_sigma >= 0.0) {
            return Err(Error::Precondition("ds3 params: sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// Output-referred thermal noise: (C_S/C_FB) * sqrt(2kT/C_S).
pub fn ds3_output_noise_sigma(p: &Ds3Params) -> f64 {
    (p.c_s / p.c_fb) * (2.0 * BOLTZMANN * p.temperature / p.c_s).sqrt()
}

/// Delta-reset sample of one pixel on the DS3 unit of `column`.
pub fn drs_downshift(
    v_rst: f64,
    v_sig: f64,
    column: usize,
    p: &Ds3Params,
    ctx: &NoiseContext,
    rng: &mut SampleRng,
) -> Result<f64> {
    if v_rst < v_sig {
        return Err(Error::Precondition(format!(
            "reset sample {v_rst} V below signal sample {v_sig} V"
        )));
    }
    let flags = ctx.flags();
    let mismatch = if flags.ds3_mismatch {
        p.mismatch_sigma * ctx.draws().ds3_column[column % ARRAY_SIZE]
    } else {
        0.0
    };
    let thermal = if flags.ds3_thermal {
        gauss(rng, ds3_output_noise_sigma(p))
    } else {
        0.0
    };
    Ok(p.v_ref + p.ratio() * (v_rst - v_sig) + mismatch + thermal)
}

/// Processes the `ds` pixel rows starting at `row_block` into 128/ds outputs.
///
/// Each tile is averaged horizontally on the hold caps of its row first, then
/// the row averages are averaged vertically.
pub fn ds3_process_block(
    raw: &RawPixelFrame,
    row_block: usize,
    ds: usize,
    p: &Ds3Params,
    ctx: &NoiseContext,
) -> Result<Vec<f64>> {
    if !matches!(ds, 1 | 2 | 4) {
        return Err(Error::UnsupportedConfig(format!(
            "downsampling factor {ds} not in {{1, 2, 4}}"
        )));
    }
    if row_block % ds != 0 || row_block + ds > raw.v_rst.rows() {
        return Err(Error::Alignment { row_block, ds });
    }
    let width = raw.v_rst.cols();
    let n_out = width / ds;
    let mut rng = ctx.stream(Stream::Ds3Thermal, row_block as u64);
    let mut acc = vec![0.0; n_out];
    for r in row_block..row_block + ds {
        for (t, slot) in acc.iter_mut().enumerate() {
            let mut row_sum = 0.0;
            for c in t * ds..(t + 1) * ds {
                row_sum += drs_downshift(*raw.v_rst.get(r, c), *raw.v_sig.get(r, c), c, p, ctx, &mut rng)?;
            }
            *slot += row_sum / ds as f64;
        }
    }
    let coupling = ds > 1 && ctx.flags().ds_coupling;
    let mut crng = ctx.stream(Stream::DsCoupling, row_block as u64);
    Ok(acc
        .into_iter()
        .map(|v| {
            let v = v / ds as f64;
            if coupling {
                v + gauss(&mut crng, p.ds_coupling_sigma)
            } else {
                v
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;

    fn frame_from_diffs(diff: impl Fn(usize, usize) -> f64) -> RawPixelFrame {
        RawPixelFrame {
            v_rst: Grid::filled(ARRAY_SIZE, ARRAY_SIZE, 2.0),
            v_sig: Grid::from_fn(ARRAY_SIZE, ARRAY_SIZE, |r, c| 2.0 - diff(r, c)),
            t_exp: 1e-3,
        }
    }

    fn quiet() -> (NoiseContext, SampleRng) {
        let ctx = NoiseContext::noiseless();
        let rng = ctx.stream(Stream::Ds3Thermal, 0);
        (ctx, rng)
    }

    #[test]
    fn zero_difference_gives_reference() {
        let (ctx, mut rng) = quiet();
        let v = drs_downshift(1.3, 1.3, 0, &Ds3Params::default(), &ctx, &mut rng).unwrap();
        assert_eq!(v, 0.6);
    }

    #[test]
    fn full_swing_with_rounded_ratio() {
        let (ctx, mut rng) = quiet();
        let p = Ds3Params {
            force_rounded_ratio: true,
            ..Ds3Params::default()
        };
        let v = drs_downshift(2.0, 0.0, 0, &p, &ctx, &mut rng).unwrap();
        assert!((v - 1.5).abs() < 1e-12);
    }

    #[test]
    fn one_volt_exact_ratio() {
        let (ctx, mut rng) = quiet();
        let v = drs_downshift(2.0, 1.0, 0, &Ds3Params::default(), &ctx, &mut rng).unwrap();
        // 0.6 + 26/58, evaluated by hand.
        assert!((v - 1.048_275_862_068_965_5).abs() < 1e-12);
        assert!((v - 1.05).abs() < 2e-3);
    }

    #[test]
    fn inverted_samples_rejected() {
        let (ctx, mut rng) = quiet();
        assert!(drs_downshift(1.0, 1.1, 0, &Ds3Params::default(), &ctx, &mut rng).is_err());
    }

    #[test]
    fn noise_anchor_and_scaling() {
        let p = Ds3Params::default();
        let s = ds3_output_noise_sigma(&p);
        assert!((s - 0.25e-3).abs() / 0.25e-3 < 0.02);
        let q = Ds3Params {
            c_s: 104e-15,
            ..Ds3Params::default()
        };
        // Frozen: (104/58) * sqrt(2kT / 104 fF) at 298.15 K.
        assert!((ds3_output_noise_sigma(&q) - 5.045_018e-4).abs() < 1e-9);
        let t0 = Ds3Params {
            temperature: 0.0,
            ..Ds3Params::default()
        };
        assert_eq!(ds3_output_noise_sigma(&t0), 0.0);
    }

    #[test]
    fn ds2_tile_average() {
        let diffs = [[0.4, 0.8], [1.2, 1.6]];
        let raw = frame_from_diffs(|r, c| diffs[r % 2][c % 2]);
        let p = Ds3Params {
            force_rounded_ratio: true,
            ..Ds3Params::default()
        };
        let out = ds3_process_block(&raw, 0, 2, &p, &NoiseContext::noiseless()).unwrap();
        assert_eq!(out.len(), 64);
        // Scale-then-average and average-then-scale, both by hand.
        let scaled_first = diffs.iter().flatten().map(|d| 0.6 + 0.45 * d).sum::<f64>() / 4.0;
        let averaged_first = 0.6 + 0.45 * (diffs.iter().flatten().sum::<f64>() / 4.0);
        for v in out {
            assert!((v - 1.05).abs() < 1e-12);
            assert!((v - scaled_first).abs() < 1e-12);
            assert!((v - averaged_first).abs() < 1e-12);
        }
    }

    #[test]
    fn misaligned_block_rejected() {
        let raw = frame_from_diffs(|_, _| 0.5);
        let r = ds3_process_block(&raw, 2, 4, &Ds3Params::default(), &NoiseContext::noiseless());
        assert!(matches!(r, Err(Error::Alignment { row_block: 2, ds: 4 })));
    }
}
