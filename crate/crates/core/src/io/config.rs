//! Run configuration: `key = value` lines with dotted keys.
//!
//! `profile` picks the base parameter set and noise flags. Every other key
//! overrides one field on top of it, whatever its position in the file.
//! The echo lists every resolved value and parses back to the same config.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::adc::CdacTopology;
use crate::error::{Error, Result};
use crate::noise::NoiseFlags;
use crate::params::{Profile, SimParams};
use crate::pipeline::{ConvConfig, ExposureSchedule, Mode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    Imaging,
    Fe,
    Roi,
    Perf,
}

impl RunMode {
    pub fn name(self) -> &'static str {
        match self {
            RunMode::Imaging => "imaging",
            RunMode::Fe => "fe",
            RunMode::Roi => "roi",
            RunMode::Perf => "perf",
        }
    }

    pub fn conv_mode(self) -> Mode {
        match self {
            RunMode::Imaging => Mode::Imaging,
            RunMode::Roi => Mode::Roi,
            RunMode::Fe | RunMode::Perf => Mode::FeatureExtraction,
        }
    }
}

impl std::str::FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "imaging" => Ok(RunMode::Imaging),
            "fe" => Ok(RunMode::Fe),
            "roi" => Ok(RunMode::Roi),
            "perf" => Ok(RunMode::Perf),
            _ => Err(format!("mode '{s}' not in {{imaging, fe, roi, perf}}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: RunMode,
    pub profile: Profile,
    pub seed: u64,
    pub conv: ConvConfig,
    pub params: SimParams,
    pub flags: NoiseFlags,
    pub scene: Option<PathBuf>,
    pub filters: Option<PathBuf>,
    pub truth: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::for_profile(Profile::Ideal)
    }
}

impl RunConfig {
    pub fn for_profile(profile: Profile) -> Self {
        Self {
            mode: RunMode::Fe,
            profile,
            seed: 0,
            conv: ConvConfig::default(),
            params: SimParams::for_profile(profile),
            flags: profile.flags(),
            scene: None,
            filters: None,
            truth: None,
        }
    }

    /// Switches the base profile, resetting parameters and flags.
    pub fn set_profile(&mut self, profile: Profile) {
        let keep = self.clone();
        *self = Self {
            mode: keep.mode,
            seed: keep.seed,
            conv: keep.conv,
            scene: keep.scene,
            filters: keep.filters,
            truth: keep.truth,
            ..Self::for_profile(profile)
        };
    }

    pub fn set_mode(&mut self, mode: RunMode) {
        self.mode = mode;
        self.conv.mode = mode.conv_mode();
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode != RunMode::Imaging {
            self.conv.validate()?;
        }
        self.params.validate()
    }

    /// Canonical text form. Parses back to an equal config.
    pub fn echo(&self) -> String {
        let mut out = String::new();
        for (k, v) in entries(self) {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        }
        out
    }

    /// Short digest of the echo, stamped on every artifact.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.echo().as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

fn opt_path(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn schedule_name(s: ExposureSchedule) -> &'static str {
    match s {
        ExposureSchedule::Sequential => "sequential",
        ExposureSchedule::Parallel => "parallel",
    }
}

fn topology_name(t: CdacTopology) -> &'static str {
    match t {
        CdacTopology::Binary => "binary",
        CdacTopology::SplitArray => "split",
    }
}

macro_rules! flag_keys {
    ($m:ident) => {
        $m!(
            prnu, pixel_offset, pixel_temporal, ds3_mismatch, ds3_thermal, ds_coupling,
            mem_mismatch, mem_thermal, mac_mismatch, mac_thermal, tg_leakage,
            comparator_offset, cdac_mismatch
        )
    };
}

fn entries(c: &RunConfig) -> Vec<(&'static str, String)> {
    let p = &c.params;
    let f = |x: f64| format!("{x:?}");
    let mut v: Vec<(&'static str, String)> = vec![
        ("profile", c.profile.name().into()),
        ("mode", c.mode.name().into()),
        ("seed", c.seed.to_string()),
        ("ds", c.conv.ds.to_string()),
        ("stride", c.conv.stride.to_string()),
        ("n_filt", c.conv.n_filt.to_string()),
        ("fmap_bits", c.conv.fmap_bits.to_string()),
        ("t_exp", f(c.conv.t_exp)),
        ("schedule", schedule_name(c.conv.schedule).into()),
        ("allow_beyond_silicon", c.conv.allow_beyond_silicon.to_string()),
    ];
    for (k, path) in [("scene", &c.scene), ("filters", &c.filters), ("truth", &c.truth)] {
        if let Some(s) = opt_path(path) {
            v.push((k, s));
        }
    }
    v.extend([
        ("scene.lx_min", f(p.scene.lx_min)),
        ("scene.lx_max", f(p.scene.lx_max)),
        ("pixel.c_pd", f(p.pixel.c_pd)),
        ("pixel.a_sf_pix", f(p.pixel.a_sf_pix)),
        ("pixel.v_rst_nom", f(p.pixel.v_rst_nom)),
        ("pixel.i_dark", f(p.pixel.i_dark)),
        ("pixel.lux_to_current", f(p.pixel.lux_to_current)),
        ("pixel.prnu_sigma", f(p.pixel.prnu_sigma)),
        ("pixel.tn_sigma", f(p.pixel.tn_sigma)),
        ("pixel.offset_fpn_sigma", f(p.pixel.offset_fpn_sigma)),
        ("pixel.c_s_readout", f(p.pixel.c_s_readout)),
        ("pixel.temperature", f(p.pixel.temperature)),
        ("ds3.c_s", f(p.ds3.c_s)),
        ("ds3.c_fb", f(p.ds3.c_fb)),
        ("ds3.v_ref", f(p.ds3.v_ref)),
        ("ds3.v_cm", f(p.ds3.v_cm)),
        ("ds3.mismatch_sigma", f(p.ds3.mismatch_sigma)),
        ("ds3.ds_coupling_sigma", f(p.ds3.ds_coupling_sigma)),
        ("ds3.force_rounded_ratio", p.ds3.force_rounded_ratio.to_string()),
        ("ds3.temperature", f(p.ds3.temperature)),
        ("memory.c_mem", f(p.memory.c_mem)),
        ("memory.a_sf_mem", f(p.memory.a_sf_mem)),
        ("memory.drift_rate", f(p.memory.drift_rate)),
        ("memory.sf_mismatch_sigma", f(p.memory.sf_mismatch_sigma)),
        ("memory.cubic_coeff", f(p.memory.cubic_coeff)),
        ("memory.temperature", f(p.memory.temperature)),
        ("mac.c_u", f(p.mac.c_u)),
        ("mac.v_cm", f(p.mac.v_cm)),
        ("mac.clamp_lo", f(p.mac.clamp_lo)),
        ("mac.clamp_hi", f(p.mac.clamp_hi)),
        ("mac.cap_mismatch_sigma", f(p.mac.cap_mismatch_sigma)),
        ("mac.tg_leakage_sigma", f(p.mac.tg_leakage_sigma)),
        ("mac.temperature", f(p.mac.temperature)),
        ("adc.full_scale", f(p.adc.full_scale)),
        ("adc.comparator_offset_sigma", f(p.adc.comparator_offset_sigma)),
        ("adc.cdac_mismatch_sigma", f(p.adc.cdac_mismatch_sigma)),
        ("adc.topology", topology_name(p.adc.topology).into()),
        ("adc.v_cm", f(p.adc.v_cm)),
        ("imaging.gain", f(p.imaging_gain)),
        ("timing.t_psum", f(p.timing.t_psum)),
        ("timing.t_bit", f(p.timing.t_bit)),
        ("timing.t_overhead", f(p.timing.t_overhead)),
    ]);
    macro_rules! push_flags {
        ($($name:ident),*) => {
            $(v.push((concat!("noise.", stringify!($name)), c.flags.$name.to_string()));)*
        };
    }
    flag_keys!(push_flags);
    v
}

type Apply = std::result::Result<(), String>;

fn real(s: &str) -> std::result::Result<f64, String> {
    let x: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{s}' is not finite"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let x = real(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be > 0"))
    }
}

fn sigma(s: &str) -> std::result::Result<f64, String> {
    let x = real(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("{x} must be >= 0"))
    }
}

fn boolean(s: &str) -> std::result::Result<bool, String> {
    s.parse().map_err(|_| format!("'{s}' is not true/false"))
}

fn one_of<T: Copy + std::str::FromStr + PartialEq + std::fmt::Display>(
    s: &str,
    allowed: &[T],
) -> std::result::Result<T, String> {
    let list = allowed.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ");
    match s.parse::<T>() {
        Ok(v) if allowed.contains(&v) => Ok(v),
        _ => Err(format!("'{s}' not in {{{list}}}")),
    }
}

fn apply(c: &mut RunConfig, key: &str, val: &str) -> Apply {
    let p = &mut c.params;
    match key {
        "mode" => c.set_mode(val.parse()?),
        "seed" => c.seed = val.parse().map_err(|_| format!("seed '{val}' is not a u64"))?,
        "ds" => c.conv.ds = one_of(val, &[1, 2, 4])?,
        "stride" => c.conv.stride = one_of(val, &[2, 4, 8, 16])?,
        "n_filt" => c.conv.n_filt = one_of(val, &(1..=32).collect::<Vec<usize>>())?,
        "fmap_bits" => c.conv.fmap_bits = one_of(val, &[1, 2, 4, 8])?,
        "t_exp" => c.conv.t_exp = positive(val)?,
        "schedule" => {
            c.conv.schedule = match val {
                "sequential" => ExposureSchedule::Sequential,
                "parallel" => ExposureSchedule::Parallel,
                _ => return Err(format!("'{val}' not in {{sequential, parallel}}")),
            }
        }
        "allow_beyond_silicon" => c.conv.allow_beyond_silicon = boolean(val)?,
        "scene" => c.scene = Some(PathBuf::from(val)),
        "filters" => c.filters = Some(PathBuf::from(val)),
        "truth" => c.truth = Some(PathBuf::from(val)),
        "scene.lx_min" => p.scene.lx_min = sigma(val)?,
        "scene.lx_max" => p.scene.lx_max = positive(val)?,
        "pixel.c_pd" => p.pixel.c_pd = positive(val)?,
        "pixel.a_sf_pix" => p.pixel.a_sf_pix = positive(val)?,
        "pixel.v_rst_nom" => p.pixel.v_rst_nom = positive(val)?,
        "pixel.i_dark" => p.pixel.i_dark = sigma(val)?,
        "pixel.lux_to_current" => p.pixel.lux_to_current = positive(val)?,
        "pixel.prnu_sigma" => p.pixel.prnu_sigma = sigma(val)?,
        "pixel.tn_sigma" => p.pixel.tn_sigma = sigma(val)?,
        "pixel.offset_fpn_sigma" => p.pixel.offset_fpn_sigma = sigma(val)?,
        "pixel.c_s_readout" => p.pixel.c_s_readout = positive(val)?,
        "pixel.temperature" => p.pixel.temperature = positive(val)?,
        "ds3.c_s" => p.ds3.c_s = positive(val)?,
        "ds3.c_fb" => p.ds3.c_fb = positive(val)?,
        "ds3.v_ref" => p.ds3.v_ref = real(val)?,
        "ds3.v_cm" => p.ds3.v_cm = real(val)?,
        "ds3.mismatch_sigma" => p.ds3.mismatch_sigma = sigma(val)?,
        "ds3.ds_coupling_sigma" => p.ds3.ds_coupling_sigma = sigma(val)?,
        "ds3.force_rounded_ratio" => p.ds3.force_rounded_ratio = boolean(val)?,
        "ds3.temperature" => p.ds3.temperature = positive(val)?,
        "memory.c_mem" => p.memory.c_mem = positive(val)?,
        "memory.a_sf_mem" => p.memory.a_sf_mem = positive(val)?,
        "memory.drift_rate" => p.memory.drift_rate = real(val)?,
        "memory.sf_mismatch_sigma" => p.memory.sf_mismatch_sigma = sigma(val)?,
        "memory.cubic_coeff" => p.memory.cubic_coeff = real(val)?,
        "memory.temperature" => p.memory.temperature = positive(val)?,
        "mac.c_u" => p.mac.c_u = positive(val)?,
        "mac.v_cm" => p.mac.v_cm = real(val)?,
        "mac.clamp_lo" => p.mac.clamp_lo = real(val)?,
        "mac.clamp_hi" => p.mac.clamp_hi = real(val)?,
        "mac.cap_mismatch_sigma" => p.mac.cap_mismatch_sigma = sigma(val)?,
        "mac.tg_leakage_sigma" => p.mac.tg_leakage_sigma = sigma(val)?,
        "mac.temperature" => p.mac.temperature = positive(val)?,
        "adc.full_scale" => p.adc.full_scale = positive(val)?,
        "adc.comparator_offset_sigma" => p.adc.comparator_offset_sigma = sigma(val)?,
        "adc.cdac_mismatch_sigma" => p.adc.cdac_mismatch_sigma = sigma(val)?,
        "adc.topology" => {
            p.adc.topology = match val {
                "binary" => CdacTopology::Binary,
                "split" => CdacTopology::SplitArray,
                _ => return Err(format!("'{val}' not in {{binary, split}}")),
            }
        }
        "adc.v_cm" => p.adc.v_cm = real(val)?,
        "imaging.gain" => p.imaging_gain = positive(val)?,
        "timing.t_psum" => p.timing.t_psum = positive(val)?,
        "timing.t_bit" => p.timing.t_bit = positive(val)?,
        "timing.t_overhead" => p.timing.t_overhead = sigma(val)?,
        _ => return apply_flag(&mut c.flags, key, val),
    }
    Ok(())
}

fn apply_flag(flags: &mut NoiseFlags, key: &str, val: &str) -> Apply {
    macro_rules! match_flags {
        ($($name:ident),*) => {
            match key.strip_prefix("noise.") {
                $(Some(stringify!($name)) => flags.$name = boolean(val)?,)*
                _ => return Err(format!("unknown key '{key}'")),
            }
        };
    }
    flag_keys!(match_flags);
    Ok(())
}

/// Parses config text. `name` labels errors.
pub fn parse_config(text: &str, name: &str) -> Result<RunConfig> {
    parse_config_with(text, name, None)
}

/// As [`parse_config`], with `profile` replacing whatever the file selects.
pub fn parse_config_with(text: &str, name: &str, profile: Option<Profile>) -> Result<RunConfig> {
    let err = |line: usize, msg: String| Error::Parse {
        path: name.to_string(),
        line,
        msg,
    };
    let mut seen: HashMap<String, usize> = HashMap::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let Some((k, v)) = l.split_once('=') else {
            return Err(err(line, format!("expected 'key = value', got '{l}'")));
        };
        let (k, v) = (k.trim(), v.trim());
        if let Some(first) = seen.insert(k.to_string(), line) {
            return Err(err(line, format!("key '{k}' already set on line {first}")));
        }
        pairs.push((line, k, v));
    }
    let mut cfg = RunConfig::default();
    if let Some(&(line, _, v)) = pairs.iter().find(|(_, k, _)| *k == "profile") {
        cfg.set_profile(v.parse().map_err(|e: Error| err(line, e.to_string()))?);
    }
    if let Some(p) = profile {
        cfg.set_profile(p);
    }
    for (line, k, v) in pairs {
        if k != "profile" {
            apply(&mut cfg, k, v).map_err(|m| err(line, format!("{k}: {m}")))?;
        }
    }
    cfg.validate().map_err(|e| Error::Format {
        path: name.to_string(),
        msg: e.to_string(),
    })?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>, profile: Option<Profile>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config_with(&text, &path.display().to_string(), profile)?;
    // Input paths in a file are relative to that file.
    let base = path.parent().unwrap_or(Path::new(""));
    for p in [&mut cfg.scene, &mut cfg.filters, &mut cfg.truth].into_iter().flatten() {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Applies one override from outside a file (command line).
pub fn override_key(cfg: &mut RunConfig, key: &str, val: &str) -> Result<()> {
    if key == "profile" {
        cfg.set_profile(val.parse()?);
        return Ok(());
    }
    apply(cfg, key, val).map_err(|m| Error::Precondition(format!("{key}: {m}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = parse_config("", "t").unwrap();
        assert_eq!((c.conv.ds, c.conv.stride, c.conv.fmap_bits), (1, 2, 8));
        assert_eq!(c.profile, Profile::Ideal);
        assert_eq!(c.flags, NoiseFlags::none());
    }

    #[test]
    fn echo_round_trip() {
        let text = "profile = calibrated\nds = 4\nstride = 4\nmac.cap_mismatch_sigma = 0.01\nnoise.tg_leakage = true\nscene = a b.pgm\n";
        let c = parse_config(text, "t").unwrap();
        assert_eq!(c.params.mac.cap_mismatch_sigma, 0.01);
        assert!(c.flags.tg_leakage);
        let again = parse_config(&c.echo(), "echo").unwrap();
        assert_eq!(again, c);
        assert_eq!(again.hash(), c.hash());
    }

    #[test]
    fn profile_applies_before_overrides() {
        let c = parse_config("noise.prnu = false\nprofile = calibrated\n", "t").unwrap();
        assert!(!c.flags.prnu);
        assert!(c.flags.mem_thermal);
    }

    fn line_of(text: &str) -> usize {
        match parse_config(text, "t").unwrap_err() {
            Error::Parse { line, .. } => line,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn line_numbered_errors() {
        assert_eq!(line_of("# c\nds = 1\nbogus.key = 3\n"), 3);
        assert_eq!(line_of("ds = 3\n"), 1);
        assert_eq!(line_of("\n\nstride = 5\n"), 3);
        assert_eq!(line_of("ds = 1\nds = 2\n"), 2);
        assert_eq!(line_of("seed 4\n"), 1);
        assert_eq!(line_of("pixel.c_pd = -1\n"), 1);
        assert_eq!(line_of("profile = noisy\n"), 1);
    }

    #[test]
    fn ds3_message_names_allowed_values() {
        let e = parse_config("ds = 3", "t").unwrap_err().to_string();
        assert!(e.contains("{1, 2, 4}"), "{e}");
    }

    #[test]
    fn hash_tracks_content() {
        let a = parse_config("seed = 1", "t").unwrap();
        let b = parse_config("seed = 2", "t").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
