//! 3T active-pixel array: integration, reset level, PRNU and temporal noise.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::{gauss, NoiseContext, Stream};
use crate::{ARRAY_SIZE, BOLTZMANN, ROOM_TEMPERATURE};

/// Illuminance at which a 20 ms exposure discharges the full reset swing.
pub const FULL_SCALE_LUX: f64 = 1500.0;
/// Exposure used to define the responsivity calibration.
pub const CALIBRATION_EXPOSURE: f64 = 20e-3;
/// Dark current expressed as an equivalent illuminance (sets the low-light floor).
pub const DARK_EQUIVALENT_LUX: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PixelParams {
    /// Photodiode capacitance (F).
    pub c_pd: f64,
    /// Pixel source-follower gain (V/V).
    pub a_sf_pix: f64,
    /// Nominal reset level (V).
    pub v_rst_nom: f64,
    /// Dark current (A).
    pub i_dark: f64,
    /// Responsivity (A/lx).
    pub lux_to_current: f64,
    /// Photoresponse non-uniformity, as a fraction of full scale at half scale.
    pub prnu_sigma: f64,
    /// Temporal noise, as a fraction of full scale.
    pub tn_sigma: f64,
    /// Additive per-pixel reset offset (V). DRS cancels it.
    pub offset_fpn_sigma: f64,
    /// Column sampling capacitance seen during readout (F).
    pub c_s_readout: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl Default for PixelParams {
    fn default() -> Self {
        let c_pd = 12.2e-15;
        let v_rst_nom = 2.0;
        let lux_to_current = v_rst_nom * c_pd / (FULL_SCALE_LUX * CALIBRATION_EXPOSURE);
        Self {
            c_pd,
            a_sf_pix: 0.69,
            v_rst_nom,
            i_dark: DARK_EQUIVALENT_LUX * lux_to_current,
            lux_to_current,
            prnu_sigma: 0.0,
            tn_sigma: 0.0,
            offset_fpn_sigma: 0.0,
            c_s_readout: 29e-15,
            temperature: ROOM_TEMPERATURE,
        }
    }
}

impl PixelParams {
    /// Defaults with the measured PRNU (2.44 %FS) and temporal noise (0.75 %FS).
    pub fn calibrated() -> Self {
        Self {
            prnu_sigma: 0.0244,
            tn_sigma: 0.0075,
            offset_fpn_sigma: 5e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Precondition(format!("pixel params: {m}")));
        if !(self.c_pd > 0.0) || !(self.c_s_readout > 0.0) {
            return bad("capacitances must be positive");
        }
        if !(self.a_sf_pix > 0.0 && self.a_sf_pix <= 1.0) {
            return bad("a_sf_pix must lie in (0, 1]");
        }
        if !(self.prnu_sigma >= 0.0 && self.tn_sigma >= 0.0 && self.offset_fpn_sigma >= 0.0) {
            return bad("noise sigmas must be non-negative");
        }
        if !(self.v_rst_nom > 0.0) || !(self.i_dark >= 0.0) || !(self.lux_to_current >= 0.0) {
            return bad("reset level, dark current and responsivity must be non-negative");
        }
        if !(self.temperature >= 0.0) {
            return bad("temperature must be non-negative");
        }
        Ok(())
    }

    /// Std-dev of the readout temporal noise applied to the signal sample.
    pub fn temporal_sigma(&self) -> f64 {
        let ktc = pixel_readout_noise_sigma(self, self.c_s_readout);
        let tn = self.tn_sigma * self.v_rst_nom;
        (ktc * ktc + tn * tn).sqrt()
    }
}

/// Reset and signal samples of every pixel after one exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPixelFrame {
    pub v_rst: Grid<f64>,
    pub v_sig: Grid<f64>,
    pub t_exp: f64,
}

/// Thermal noise at the pixel output: sqrt(2kT) * sqrt(A^2/C_PD + 1/C_S).
pub fn pixel_readout_noise_sigma(p: &PixelParams, c_s: f64) -> f64 {
    let a = p.a_sf_pix;
    (2.0 * BOLTZMANN * p.temperature).sqrt() * (a * a / p.c_pd + 1.0 / c_s).sqrt()
}

/// Integrates `scene` (lx) for `t_exp` seconds.
pub fn expose(
    scene: &Grid<f64>,
    t_exp: f64,
    p: &PixelParams,
    ctx: &NoiseContext,
) -> Result<RawPixelFrame> {
    scene.expect_shape(ARRAY_SIZE, ARRAY_SIZE)?;
    p.validate()?;
    if !(t_exp > 0.0) {
        return Err(Error::Precondition(format!("exposure must be positive, got {t_exp}")));
    }
    if let Some(bad) = scene.as_slice().iter().find(|&&lx| !(lx >= 0.0)) {
        return Err(Error::Precondition(format!("illuminance must be >= 0, got {bad}")));
    }

    let flags = ctx.flags();
    let draws = ctx.draws();
    let sigma_t = if flags.pixel_temporal { p.temporal_sigma() } else { 0.0 };

    let mut v_rst = Grid::filled(ARRAY_SIZE, ARRAY_SIZE, p.v_rst_nom);
    let mut v_sig = Grid::filled(ARRAY_SIZE, ARRAY_SIZE, 0.0);
    for r in 0..ARRAY_SIZE {
        let mut rng = ctx.stream(Stream::PixelTemporal, r as u64);
        for c in 0..ARRAY_SIZE {
            let i = r * ARRAY_SIZE + c;
            let gain = if flags.prnu {
                (1.0 + 2.0 * p.prnu_sigma * draws.prnu[i]).max(0.0)
            } else {
                1.0
            };
            let rst = if flags.pixel_offset {
                p.v_rst_nom + p.offset_fpn_sigma * draws.pixel_offset[i]
            } else {
                p.v_rst_nom
            };
            let i_ph = p.lux_to_current * scene.get(r, c) * gain;
            let drop = (i_ph + p.i_dark) * t_exp / p.c_pd;
            let noise = gauss(&mut rng, sigma_t);
            v_rst.set(r, c, rst);
            v_sig.set(r, c, (rst - drop + noise).clamp(0.0, rst));
        }
    }
    Ok(RawPixelFrame { v_rst, v_sig, t_exp })
}

/// Linear map from 8b scene codes to illuminance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneMapping {
    pub lx_min: f64,
    pub lx_max: f64,
}

impl Default for SceneMapping {
    fn default() -> Self {
        Self {
            lx_min: 0.0,
            lx_max: FULL_SCALE_LUX,
        }
    }
}

impl SceneMapping {
    pub fn lux(&self, code: u8) -> f64 {
        self.lx_min + (self.lx_max - self.lx_min) * f64::from(code) / 255.0
    }

    pub fn apply(&self, codes: &Grid<u8>) -> Grid<f64> {
        codes.map(|&c| self.lux(c))
    }
}
