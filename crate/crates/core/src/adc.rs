//! Charge-sharing aggregation and behavioral SAR conversion.

use crate::error::{Error, Result};
use crate::noise::{NoiseContext, CDAC_BITS, SPLIT_CAPS};

/// Bits of the search ladder; lower resolutions keep its top bits.
pub const LADDER_BITS: u32 = 8;
/// Psums aggregated per conversion.
pub const SEGMENTS: usize = 16;

/// Signed 8b offset, applied as `code * full_scale / 256` before comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct OffsetRegister(pub i8);

impl OffsetRegister {
    pub fn volts(self, full_scale: f64) -> f64 {
        f64::from(self.0) * full_scale / 256.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdacTopology {
    /// Binary-weighted ladder of unit caps.
    Binary,
    /// Two 4b sub-arrays joined by a 16/15 bridge capacitor.
    SplitArray,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdcParams {
    pub full_scale: f64,
    /// Output bits: 1, 2, 4 or 8.
    pub resolution: u32,
    /// Static comparator offset std-dev (V).
    pub comparator_offset_sigma: f64,
    /// Relative std-dev of one CDAC unit capacitor.
    pub cdac_mismatch_sigma: f64,
    pub topology: CdacTopology,
    pub v_cm: f64,
}

impl Default for AdcParams {
    fn default() -> Self {
        Self {
            full_scale: 1.2,
            resolution: 8,
            // 3 sigma = 1.62 mV.
            comparator_offset_sigma: 0.54e-3,
            cdac_mismatch_sigma: 0.0,
            topology: CdacTopology::Binary,
            v_cm: 0.6,
        }
    }
}

impl AdcParams {
    pub fn with_resolution(&self, bits: u32) -> Self {
        Self {
            resolution: bits,
            ..self.clone()
        }
    }

    pub fn lsb(&self) -> f64 {
        self.full_scale / f64::from(1u32 << self.resolution)
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.resolution, 1 | 2 | 4 | 8) {
            return Err(Error::UnsupportedConfig(format!(
                "ADC resolution {} not in {{1, 2, 4, 8}}",
                self.resolution
            )));
        }
        if !(self.full_scale > 0.0) {
            return Err(Error::Precondition("ADC full scale must be positive".into()));
        }
        if !(self.comparator_offset_sigma >= 0.0 && self.cdac_mismatch_sigma >= 0.0) {
            return Err(Error::Precondition("ADC sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// One converter instance with its frozen imperfections.
#[derive(Debug, Clone, PartialEq)]
pub struct SarAdc {
    /// Ladder weight of each bit (V), LSB first. `None` for an exact ladder.
    bit_weights: Option<[f64; CDAC_BITS]>,
    /// Relative size of each charge-sharing segment. `None` for equal segments.
    segments: Option<[f64; SEGMENTS]>,
    comparator_offset: f64,
}

impl SarAdc {
    pub fn ideal() -> Self {
        Self {
            bit_weights: None,
            segments: None,
            comparator_offset: 0.0,
        }
    }

    /// Converter `index` with the imperfections enabled in `ctx`.
    pub fn instance(index: usize, p: &AdcParams, ctx: &NoiseContext) -> Self {
        let flags = ctx.flags();
        let d = ctx.draws();
        let comparator_offset = if flags.comparator_offset {
            p.comparator_offset_sigma * d.comparator[index % d.comparator.len()]
        } else {
            0.0
        };
        if !flags.cdac_mismatch || p.cdac_mismatch_sigma == 0.0 {
            return Self {
                comparator_offset,
                ..Self::ideal()
            };
        }
        let n_adc = d.comparator.len();
        let i = index % n_adc;
        let s = p.cdac_mismatch_sigma;
        let z_bits = &d.cdac_bits[i * (CDAC_BITS + 1)..(i + 1) * (CDAC_BITS + 1)];
        let z_split = &d.cdac_split[i * SPLIT_CAPS..(i + 1) * SPLIT_CAPS];
        let bit_weights = match p.topology {
            CdacTopology::Binary => binary_weights(p.full_scale, s, z_bits),
            CdacTopology::SplitArray => split_array_weights(p.full_scale, s, z_split),
        };
        let mut segments = [1.0; SEGMENTS];
        for (k, seg) in segments.iter_mut().enumerate() {
            // A segment is 16 unit caps.
            *seg = 1.0 + s / 4.0 * d.cdac_segments[i * SEGMENTS + k];
        }
        Self {
            bit_weights: Some(bit_weights),
            segments: Some(segments),
            comparator_offset,
        }
    }

    pub fn comparator_offset(&self) -> f64 {
        self.comparator_offset
    }

    /// Aggregates 16 psums onto the CDAC.
    pub fn charge_share(&self, psums: &[f64]) -> Result<f64> {
        if psums.len() != SEGMENTS {
            return Err(Error::IncompleteAccumulation {
                expected: SEGMENTS,
                got: psums.len(),
            });
        }
        // Deviations from the first psum keep equal inputs exact.
        let pivot = psums[0];
        Ok(match &self.segments {
            None => pivot + psums.iter().map(|v| v - pivot).sum::<f64>() / SEGMENTS as f64,
            Some(seg) => {
                let q: f64 = psums.iter().zip(seg).map(|(v, c)| (v - pivot) * c).sum();
                pivot + q / seg.iter().sum::<f64>()
            }
        })
    }

    /// Successive approximation of `v` at `p.resolution` bits.
    pub fn convert(&self, v: f64, offset: OffsetRegister, p: &AdcParams) -> u16 {
        let node = v + offset.volts(p.full_scale) + self.comparator_offset;
        let lsb8 = p.full_scale / f64::from(1u32 << LADDER_BITS);
        let mut code: u32 = 0;
        let mut level = 0.0;
        for step in 0..p.resolution {
            let bit = LADDER_BITS - 1 - step;
            let trial_code = code | (1 << bit);
            let trial = match &self.bit_weights {
                None => f64::from(trial_code) * lsb8,
                Some(w) => level + w[bit as usize],
            };
            if node >= trial {
                code = trial_code;
                level = trial;
            }
        }
        (code >> (LADDER_BITS - p.resolution)) as u16
    }
}

fn binary_weights(full_scale: f64, sigma: f64, z: &[f64]) -> [f64; CDAC_BITS] {
    let mut caps = [0.0; CDAC_BITS + 1];
    for (i, c) in caps.iter_mut().enumerate().take(CDAC_BITS) {
        let n = f64::from(1u32 << i);
        *c = n + sigma * n.sqrt() * z[i];
    }
    caps[CDAC_BITS] = 1.0 + sigma * z[CDAC_BITS];
    let total: f64 = caps.iter().sum();
    let mut w = [0.0; CDAC_BITS];
    for i in 0..CDAC_BITS {
        w[i] = full_scale * caps[i] / total;
    }
    w
}

/// Bit weights of the split array from nodal analysis of the two floating
/// nodes joined by the bridge cap.
fn split_array_weights(full_scale: f64, sigma: f64, z: &[f64]) -> [f64; CDAC_BITS] {
    let perturb = |n: f64, zi: f64| n + sigma * n.sqrt() * zi;
    let lsb: Vec<f64> = (0..4).map(|i| perturb(f64::from(1u32 << i), z[i])).collect();
    let msb: Vec<f64> = (0..4).map(|i| perturb(f64::from(1u32 << i), z[4 + i])).collect();
    let dummy = perturb(1.0, z[8]);
    let bridge = perturb(16.0 / 15.0, z[9]);
    let c_l = lsb.iter().sum::<f64>() + dummy;
    let c_m: f64 = msb.iter().sum();
    let det = (c_m + bridge) * (c_l + bridge) - bridge * bridge;
    // Nominal MSB weight fixes the scale so the ideal ladder is binary in FS.
    let nominal_det = {
        let (m, l, a) = (15.0, 16.0, 16.0 / 15.0);
        (m + a) * (l + a) - a * a
    };
    let scale = full_scale * 0.5 / (8.0 * (16.0 + 16.0 / 15.0) / nominal_det);
    let mut w = [0.0; CDAC_BITS];
    for i in 0..4 {
        w[i] = scale * lsb[i] * bridge / det;
        w[4 + i] = scale * msb[i] * (c_l + bridge) / det;
    }
    w
}

/// Arithmetic-mean aggregation of exactly 16 psums.
pub fn charge_share(psums: &[f64]) -> Result<f64> {
    SarAdc::ideal().charge_share(psums)
}

/// Converts `v` with converter `adc`.
pub fn sar_convert(v: f64, offset: OffsetRegister, p: &AdcParams, adc: &SarAdc) -> u16 {
    adc.convert(v, offset, p)
}

/// Static linearity from a dense ramp (64 samples per code, end codes excluded).
#[derive(Debug, Clone, PartialEq)]
pub struct Linearity {
    pub dnl: Vec<f64>,
    pub inl: Vec<f64>,
    pub monotone: bool,
}

impl Linearity {
    pub fn max_abs_dnl(&self) -> f64 {
        self.dnl.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn max_abs_inl(&self) -> f64 {
        self.inl.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

pub fn ideal_transfer_check(p: &AdcParams, adc: &SarAdc) -> Linearity {
    const PER_CODE: usize = 64;
    let codes = 1usize << p.resolution;
    let n = codes * PER_CODE;
    let mut hits = vec![0usize; codes];
    let mut prev = 0u16;
    let mut monotone = true;
    for j in 0..n {
        let v = (j as f64 + 0.5) * p.full_scale / n as f64;
        let c = adc.convert(v, OffsetRegister(0), p);
        monotone &= c >= prev;
        prev = c;
        hits[usize::from(c)] += 1;
    }
    let dnl: Vec<f64> = hits[1..codes.saturating_sub(1).max(1)]
        .iter()
        .map(|&h| h as f64 / PER_CODE as f64 - 1.0)
        .collect();
    let inl = dnl
        .iter()
        .scan(0.0, |acc, d| {
            *acc += d;
            Some(*acc)
        })
        .collect();
    Linearity { dnl, inl, monotone }
}
