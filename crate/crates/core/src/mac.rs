//! Charge-domain multiply-accumulate on a switched-capacitor amplifier.
//!
//! Each of the eight SC amplifiers serves 16 columns. A column's weight
//! magnitude selects 1, 2 and/or 4 unit capacitors; its sign decides whether
//! the input is applied in the first (non-inverting) or second (inverting)
//! phase. The shared feedback capacitor is 4 unit caps per column.

use crate::error::{Error, Result};
use crate::noise::{gauss, NoiseContext, SampleRng, FB_UNITS, GROUP_WIDTH, UNITS_PER_INPUT};
use crate::{BOLTZMANN, ROOM_TEMPERATURE};

/// Highest voltage accepted on a MAC input.
pub const MAX_INPUT: f64 = 1.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Pos,
    Neg,
}

/// 4b sign-magnitude weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Weight4b {
    sign: Sign,
    magnitude: u8,
}

impl Weight4b {
    pub const ZERO: Weight4b = Weight4b {
        sign: Sign::Pos,
        magnitude: 0,
    };

    pub fn sign(self) -> Sign {
        self.sign
    }

    pub fn magnitude(self) -> u8 {
        self.magnitude
    }

    pub fn value(self) -> i32 {
        match self.sign {
            Sign::Pos => i32::from(self.magnitude),
            Sign::Neg => -i32::from(self.magnitude),
        }
    }
}

impl TryFrom<i32> for Weight4b {
    type Error = Error;

    fn try_from(w: i32) -> Result<Self> {
        encode_weight(w)
    }
}

pub fn encode_weight(w: i32) -> Result<Weight4b> {
    if !(-7..=7).contains(&w) {
        return Err(Error::WeightRange(w));
    }
    Ok(Weight4b {
        sign: if w < 0 { Sign::Neg } else { Sign::Pos },
        magnitude: w.unsigned_abs() as u8,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    /// Unit capacitor (F).
    pub c_u: f64,
    pub units_per_column_fb: usize,
    pub columns: usize,
    /// Output reference (V).
    pub v_cm: f64,
    pub clamp_lo: f64,
    pub clamp_hi: f64,
    /// Relative std-dev of each unit capacitor.
    pub cap_mismatch_sigma: f64,
    /// Extra additive output error for global-corner studies (V).
    pub tg_leakage_sigma: f64,
    /// Kelvin.
    pub temperature: f64,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            c_u: 7e-15,
            units_per_column_fb: 4,
            columns: GROUP_WIDTH,
            v_cm: 0.6,
            clamp_lo: 0.15,
            clamp_hi: 1.05,
            cap_mismatch_sigma: 0.0062,
            tg_leakage_sigma: 0.0,
            temperature: ROOM_TEMPERATURE,
        }
    }
}

impl MacParams {
    pub fn c_fb_total(&self) -> f64 {
        (self.columns * self.units_per_column_fb) as f64 * self.c_u
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns != GROUP_WIDTH || self.units_per_column_fb * self.columns != FB_UNITS {
            return Err(Error::UnsupportedConfig(format!(
                "MAC array is built for {GROUP_WIDTH} columns with {FB_UNITS} feedback units"
            )));
        }
        if !(self.c_fb_total() > 0.0) || !(self.clamp_lo < self.clamp_hi) {
            return Err(Error::Precondition("mac params: bad feedback cap or clamp range".into()));
        }
        if !(self.cap_mismatch_sigma >= 0.0 && self.tg_leakage_sigma >= 0.0) {
            return Err(Error::Precondition("mac params: sigmas must be non-negative".into()));
        }
        Ok(())
    }
}

/// Relative unit-capacitor values of one SC amplifier (1.0 = nominal).
#[derive(Debug, Clone, PartialEq)]
pub struct MacCaps {
    input: Vec<[f64; UNITS_PER_INPUT]>,
    fb: Vec<f64>,
}

impl MacCaps {
    pub fn nominal() -> Self {
        Self {
            input: vec![[1.0; UNITS_PER_INPUT]; GROUP_WIDTH],
            fb: vec![1.0; FB_UNITS],
        }
    }

    /// Caps of amplifier `group`, perturbed by the context's static draws.
    pub fn for_group(group: usize, p: &MacParams, ctx: &NoiseContext) -> Self {
        if !ctx.flags().mac_mismatch {
            return Self::nominal();
        }
        let d = ctx.draws();
        let s = p.cap_mismatch_sigma;
        let base = group * GROUP_WIDTH * UNITS_PER_INPUT;
        let input = (0..GROUP_WIDTH)
            .map(|i| {
                let mut u = [0.0; UNITS_PER_INPUT];
                for (k, slot) in u.iter_mut().enumerate() {
                    *slot = 1.0 + s * d.mac_input_caps[base + i * UNITS_PER_INPUT + k];
                }
                u
            })
            .collect();
        let fb = (0..FB_UNITS)
            .map(|k| 1.0 + s * d.mac_fb_caps[group * FB_UNITS + k])
            .collect();
        Self { input, fb }
    }

    /// Capacitance switched in by a weight magnitude on input `i`, in unit caps.
    pub fn weight_units(&self, i: usize, magnitude: u8) -> f64 {
        let u = &self.input[i];
        let mut c = 0.0;
        if magnitude & 1 != 0 {
            c += u[0];
        }
        if magnitude & 2 != 0 {
            c += u[1] + u[2];
        }
        if magnitude & 4 != 0 {
            c += u[3] + u[4] + u[5] + u[6];
        }
        c
    }

    pub fn fb_units(&self) -> f64 {
        self.fb.iter().sum()
    }
}

/// Output of one row psum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsumOutput {
    /// Output after the amplifier's swing limits.
    pub v_mac: f64,
    pub unclamped: f64,
    pub saturated: bool,
}

fn check_inputs(v_buf: &[f64], w: &[Weight4b]) -> Result<()> {
    if v_buf.len() != GROUP_WIDTH || w.len() != GROUP_WIDTH {
        return Err(Error::Dimension {
            expected: format!("{GROUP_WIDTH} inputs and weights"),
            got: format!("{} inputs, {} weights", v_buf.len(), w.len()),
        });
    }
    if let Some(v) = v_buf.iter().find(|v| !(0.0..=MAX_INPUT).contains(*v)) {
        return Err(Error::Precondition(format!(
            "MAC input {v} V outside [0, {MAX_INPUT}] V"
        )));
    }
    Ok(())
}

/// Closed-form psum of one 16-element row.
pub fn psum_row(
    v_buf: &[f64],
    w: &[Weight4b],
    p: &MacParams,
    caps: &MacCaps,
    ctx: &NoiseContext,
    rng: &mut SampleRng,
) -> Result<PsumOutput> {
    check_inputs(v_buf, w)?;
    let mut pos = 0.0;
    let mut neg = 0.0;
    let mut active = 0.0;
    for (i, (v, wi)) in v_buf.iter().zip(w).enumerate() {
        let c = caps.weight_units(i, wi.magnitude) * p.c_u;
        active += c;
        match wi.sign {
            Sign::Pos => pos += c * v,
            Sign::Neg => neg += c * v,
        }
    }
    let c_fb = caps.fb_units() * p.c_u;
    let mut v = p.v_cm + (pos - neg) / c_fb;
    let flags = ctx.flags();
    if flags.mac_thermal {
        v += gauss(rng, (BOLTZMANN * p.temperature * (active + c_fb)).sqrt() / c_fb);
    }
    if flags.tg_leakage {
        v += gauss(rng, p.tg_leakage_sigma);
    }
    let v_mac = v.clamp(p.clamp_lo, p.clamp_hi);
    Ok(PsumOutput {
        v_mac,
        unclamped: v,
        saturated: v_mac != v,
    })
}

/// Charge on the amplifier's inverting node at the end of the first phase.
fn phase1_charge(v_buf: &[f64], w: &[Weight4b], p: &MacParams, caps: &MacCaps, v_a: f64) -> f64 {
    let mut q = 0.0;
    for (i, (v, wi)) in v_buf.iter().zip(w).enumerate() {
        let c = caps.weight_units(i, wi.magnitude) * p.c_u;
        q -= match wi.sign {
            Sign::Pos => c * (v - v_a),
            Sign::Neg => c * (-v_a),
        };
    }
    q + caps.fb_units() * p.c_u * (v_a - p.v_cm)
}

/// Charge on the same node at the end of the second phase, for output `v_out`.
fn phase2_charge(
    v_buf: &[f64],
    w: &[Weight4b],
    p: &MacParams,
    caps: &MacCaps,
    v_a: f64,
    v_out: f64,
) -> f64 {
    let mut q = 0.0;
    for (i, (v, wi)) in v_buf.iter().zip(w).enumerate() {
        let c = caps.weight_units(i, wi.magnitude) * p.c_u;
        q -= match wi.sign {
            Sign::Neg => c * (v - v_a),
            Sign::Pos => c * (-v_a),
        };
    }
    q + caps.fb_units() * p.c_u * (v_a - v_out)
}

/// Solves charge conservation between the two phases numerically for the
/// output voltage, with the amplifier input sitting at `v_a` (which absorbs
/// any amplifier offset). Noise-free and unclamped.
pub fn psum_row_oracle(
    v_buf: &[f64],
    w: &[Weight4b],
    p: &MacParams,
    caps: &MacCaps,
    v_a: f64,
) -> Result<f64> {
    check_inputs(v_buf, w)?;
    let q1 = phase1_charge(v_buf, w, p, caps, v_a);
    let residual = |v_out: f64| phase2_charge(v_buf, w, p, caps, v_a, v_out) - q1;
    // The residual is affine in the output, so one secant step is exact.
    let (x0, x1) = (0.0, 1.0);
    let (r0, r1) = (residual(x0), residual(x1));
    Ok(x0 - r0 * (x1 - x0) / (r1 - r0))
}
