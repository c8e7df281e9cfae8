//! Parameter bundle and named noise profiles.

use crate::adc::AdcParams;
use crate::ds3::Ds3Params;
use crate::error::{Error, Result};
use crate::mac::MacParams;
use crate::memory::MemoryParams;
use crate::noise::NoiseFlags;
use crate::pipeline::timing::TimingModel;
use crate::sensor::{PixelParams, SceneMapping};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// Every noise and mismatch source off, no drift.
    Ideal,
    /// Characterized sigmas and drift.
    Calibrated,
    /// Parameters and flags set individually.
    Custom,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Ideal => "ideal",
            Profile::Calibrated => "calibrated",
            Profile::Custom => "custom",
        }
    }

    pub fn flags(self) -> NoiseFlags {
        match self {
            Profile::Ideal => NoiseFlags::none(),
            Profile::Calibrated | Profile::Custom => NoiseFlags::all(),
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ideal" => Ok(Profile::Ideal),
            "calibrated" => Ok(Profile::Calibrated),
            "custom" => Ok(Profile::Custom),
            _ => Err(Error::Precondition(format!(
                "profile '{s}' not in {{ideal, calibrated, custom}}"
            ))),
        }
    }
}

/// Every analog parameter of the signal chain.
#[derive(Debug, Clone, PartialEq)]
pub struct SimParams {
    pub pixel: PixelParams,
    pub ds3: Ds3Params,
    pub memory: MemoryParams,
    pub mac: MacParams,
    pub adc: AdcParams,
    /// Gain from pixel swing (V_RST - V_SIG) to the imaging-mode ADC input.
    pub imaging_gain: f64,
    pub scene: SceneMapping,
    pub timing: TimingModel,
}

impl SimParams {
    pub fn ideal() -> Self {
        Self {
            pixel: PixelParams::default(),
            ds3: Ds3Params::default(),
            memory: MemoryParams {
                drift_rate: 0.0,
                ..MemoryParams::typical()
            },
            mac: MacParams::default(),
            adc: AdcParams::default(),
            imaging_gain: 0.6,
            scene: SceneMapping::default(),
            timing: TimingModel::calibrated(),
        }
    }

    pub fn calibrated() -> Self {
        Self {
            pixel: PixelParams::calibrated(),
            memory: MemoryParams::typical(),
            ..Self::ideal()
        }
    }

    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Ideal => Self::ideal(),
            Profile::Calibrated | Profile::Custom => Self::calibrated(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.pixel.validate()?;
        self.ds3.validate()?;
        self.memory.validate()?;
        self.mac.validate()?;
        self.adc.validate()?;
        if !(self.imaging_gain > 0.0) {
            return Err(Error::Precondition("imaging gain must be positive".into()));
        }
        Ok(())
    }
}
