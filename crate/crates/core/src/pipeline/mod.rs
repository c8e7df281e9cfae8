//! Frame-level orchestration: imaging and feature-extraction modes.

pub mod reference;
pub mod schedule;
pub mod timing;

use crate::adc::{OffsetRegister, SarAdc};
use crate::ds3::ds3_process_block;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mac::{psum_row, MacCaps, Weight4b};
use crate::memory::{retention_ok, storage_pattern, AnalogMemoryState, MEM_ROWS};
use crate::noise::{mix, NoiseContext, Stream, GROUPS, GROUP_WIDTH};
use crate::params::SimParams;
use crate::perf::{fmap_size, mean_std};
use crate::roi::FcHead;
use crate::sensor::expose;
use crate::ARRAY_SIZE;

use schedule::column_plan;
use timing::{frame_timing, FrameTiming};

pub const FILTER_SIZE: usize = 16;
pub const MAX_FILTERS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Imaging,
    FeatureExtraction,
    Roi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExposureSchedule {
    /// Expose, then convolve.
    Sequential,
    /// Re-expose while the previous frame is convolved.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvConfig {
    pub mode: Mode,
    pub ds: usize,
    pub stride: usize,
    pub n_filt: usize,
    pub fmap_bits: u32,
    /// Exposure (s).
    pub t_exp: f64,
    pub schedule: ExposureSchedule,
    /// Let parallel mode overlap a convolution longer than the exposure.
    pub allow_beyond_silicon: bool,
}

impl Default for ConvConfig {
    fn default() -> Self {
        Self {
            mode: Mode::FeatureExtraction,
            ds: 1,
            stride: 2,
            n_filt: 4,
            fmap_bits: 8,
            t_exp: 12.5e-3,
            schedule: ExposureSchedule::Parallel,
            allow_beyond_silicon: false,
        }
    }
}

impl ConvConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.ds, 1 | 2 | 4) {
            return Err(Error::UnsupportedConfig(format!("ds={} not in {{1, 2, 4}}", self.ds)));
        }
        if !matches!(self.stride, 2 | 4 | 8 | 16) {
            return Err(Error::UnsupportedConfig(format!(
                "stride={} not in {{2, 4, 8, 16}}",
                self.stride
            )));
        }
        if self.n_filt == 0 || self.n_filt > MAX_FILTERS {
            return Err(Error::UnsupportedConfig(format!(
                "n_filt={} not in 1..={MAX_FILTERS}",
                self.n_filt
            )));
        }
        if !matches!(self.fmap_bits, 1 | 2 | 4 | 8) {
            return Err(Error::UnsupportedConfig(format!(
                "fmap_bits={} not in {{1, 2, 4, 8}}",
                self.fmap_bits
            )));
        }
        if !(self.t_exp > 0.0) {
            return Err(Error::Precondition(format!("t_exp must be positive, got {}", self.t_exp)));
        }
        fmap_size(self.ds, self.stride)?;
        Ok(())
    }

    pub fn fmap_size(&self) -> Result<usize> {
        fmap_size(self.ds, self.stride)
    }
}

/// One 16x16 kernel of 4b weights with its threshold offset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Filter {
    weights: Vec<Weight4b>,
    pub offset: OffsetRegister,
}

impl Filter {
    pub fn from_fn(mut f: impl FnMut(usize, usize) -> Weight4b) -> Self {
        let mut weights = Vec::with_capacity(FILTER_SIZE * FILTER_SIZE);
        for i in 0..FILTER_SIZE {
            for j in 0..FILTER_SIZE {
                weights.push(f(i, j));
            }
        }
        Self {
            weights,
            offset: OffsetRegister::default(),
        }
    }

    /// Row-major integer weights, each in [-7, 7].
    pub fn from_values(values: &[i32], offset: OffsetRegister) -> Result<Self> {
        if values.len() != FILTER_SIZE * FILTER_SIZE {
            return Err(Error::Dimension {
                expected: format!("{} weights", FILTER_SIZE * FILTER_SIZE),
                got: values.len().to_string(),
            });
        }
        let weights = values
            .iter()
            .map(|&v| Weight4b::try_from(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { weights, offset })
    }

    pub fn with_offset(mut self, offset: OffsetRegister) -> Self {
        self.offset = offset;
        self
    }

    pub fn weight(&self, i: usize, j: usize) -> Weight4b {
        self.weights[i * FILTER_SIZE + j]
    }

    pub fn row(&self, i: usize) -> &[Weight4b] {
        &self.weights[i * FILTER_SIZE..(i + 1) * FILTER_SIZE]
    }

    pub fn values(&self) -> Vec<i32> {
        self.weights.iter().map(|w| w.value()).collect()
    }
}

/// Up to 32 filters plus an optional detection head.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterBank {
    filters: Vec<Filter>,
    head: Option<FcHead>,
}

impl FilterBank {
    pub fn new(filters: Vec<Filter>) -> Result<Self> {
        if filters.len() > MAX_FILTERS {
            return Err(Error::BankCapacity(filters.len()));
        }
        Ok(Self { filters, head: None })
    }

    pub fn with_head(mut self, head: FcHead) -> Self {
        self.head = Some(head);
        self
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    pub fn head(&self) -> Option<&FcHead> {
        self.head.as_ref()
    }

    pub fn len(&self) -> usize {
        self.filters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filters.is_empty()
    }
}

/// Codes of one filter with their normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub codes: Grid<u16>,
    pub mean: f64,
    pub std: f64,
}

impl FeatureMap {
    fn new(codes: Grid<u16>) -> Self {
        let x: Vec<f64> = codes.as_slice().iter().map(|&c| f64::from(c)).collect();
        let (mean, std) = mean_std(&x);
        Self { codes, mean, std }
    }

    pub fn as_f64(&self) -> Grid<f64> {
        self.codes.map(|&c| f64::from(c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMaps {
    pub config: ConvConfig,
    pub maps: Vec<FeatureMap>,
    /// Row psums that hit the amplifier swing limits.
    pub saturated_psums: usize,
    pub timing: FrameTiming,
}

/// Exposes `scene` (lx) and convolves it with the first `cfg.n_filt` filters.
pub fn run_feature_extraction(
    scene: &Grid<f64>,
    bank: &FilterBank,
    cfg: &ConvConfig,
    params: &SimParams,
    ctx: &NoiseContext,
) -> Result<FeatureMaps> {
    cfg.validate()?;
    params.validate()?;
    if cfg.mode == Mode::Imaging {
        return Err(Error::Precondition("feature extraction needs a convolution mode".into()));
    }
    if bank.len() < cfg.n_filt {
        return Err(Error::Precondition(format!(
            "configuration asks for {} filters, bank holds {}",
            cfg.n_filt,
            bank.len()
        )));
    }
    let raw = expose(scene, cfg.t_exp, &params.pixel, ctx)?;
    let timing = frame_timing(cfg, &params.timing)?;
    let pattern = storage_pattern(cfg.ds)?;
    let plan = column_plan(cfg.ds, cfg.stride)?;
    let n_f = cfg.fmap_size()?;
    let adc_p = params.adc.with_resolution(cfg.fmap_bits);
    let macs: Vec<MacCaps> = (0..GROUPS).map(|g| MacCaps::for_group(g, &params.mac, ctx)).collect();
    let adcs: Vec<SarAdc> = (0..GROUPS).map(|g| SarAdc::instance(g, &params.adc, ctx)).collect();
    let filters = &bank.filters()[..cfg.n_filt];
    let slot_time = params.timing.slot_time(cfg.fmap_bits);

    let mut mem = AnalogMemoryState::new(&params.memory, ctx);
    let mut codes = vec![Grid::filled(n_f, n_f, 0u16); cfg.n_filt];
    let mut saturated = 0usize;
    let mut next_row = 0usize;
    let mut now = 0.0;
    let mut v_buf = [0.0; GROUP_WIDTH];
    let mut psums = [0.0; FILTER_SIZE];

    for pr in 0..n_f {
        let last_needed = pr * cfg.stride + FILTER_SIZE - 1;
        while next_row <= last_needed {
            let row = ds3_process_block(&raw, next_row * cfg.ds, cfg.ds, &params.ds3, ctx)?;
            mem.write_row(next_row % MEM_ROWS, &pattern.layout(&row), now)?;
            next_row += 1;
        }
        for (fi, filter) in filters.iter().enumerate() {
            for (si, slot) in plan.iter().enumerate() {
                for e in slot {
                    let key = mix(&[pr as u64, fi as u64, si as u64, e.group as u64]);
                    let mut rng = ctx.stream(Stream::MemoryRead, key);
                    for (i, psum) in psums.iter_mut().enumerate() {
                        let mem_row = (pr * cfg.stride + i) % MEM_ROWS;
                        for (j, v) in v_buf.iter_mut().enumerate() {
                            let col = e.mem_col + j;
                            let held = mem.held_for(mem_row, col, now)?;
                            if !retention_ok(held, &params.memory) {
                                return Err(Error::RetentionExceeded {
                                    row: mem_row,
                                    col,
                                    held_s: held,
                                });
                            }
                            *v = mem.read_cell(mem_row, col, &params.memory, now, ctx, &mut rng)?;
                        }
                        let out = psum_row(&v_buf, filter.row(i), &params.mac, &macs[e.group], ctx, &mut rng)?;
                        saturated += usize::from(out.saturated);
                        *psum = out.v_mac;
                    }
                    let v_sh = adcs[e.group].charge_share(&psums)?;
                    let code = adcs[e.group].convert(v_sh, filter.offset, &adc_p);
                    codes[fi].set(pr, e.patch_col, code);
                }
                now += slot_time;
            }
        }
    }

    Ok(FeatureMaps {
        config: cfg.clone(),
        maps: codes.into_iter().map(FeatureMap::new).collect(),
        saturated_psums: saturated,
        timing,
    })
}

/// Imaging mode: delta-reset sample of every pixel, digitized at 8b.
pub fn run_imaging(
    scene: &Grid<f64>,
    cfg: &ConvConfig,
    params: &SimParams,
    ctx: &NoiseContext,
) -> Result<Grid<u8>> {
    params.validate()?;
    if !(cfg.t_exp > 0.0) {
        return Err(Error::Precondition(format!("t_exp must be positive, got {}", cfg.t_exp)));
    }
    let raw = expose(scene, cfg.t_exp, &params.pixel, ctx)?;
    let adc_p = params.adc.with_resolution(8);
    let adcs: Vec<SarAdc> = (0..GROUPS).map(|g| SarAdc::instance(g, &params.adc, ctx)).collect();
    let gain = params.imaging_gain / params.ds3.ratio();
    let mut img = Grid::filled(ARRAY_SIZE, ARRAY_SIZE, 0u8);
    for r in 0..ARRAY_SIZE {
        let v_pix = ds3_process_block(&raw, r, 1, &params.ds3, ctx)?;
        for (c, v) in v_pix.iter().enumerate() {
            let v_adc = gain * (v - params.ds3.v_ref);
            // 16 columns share one converter.
            let code = adcs[c / GROUP_WIDTH].convert(v_adc, OffsetRegister(0), &adc_p);
            img.set(r, c, code as u8);
        }
    }
    Ok(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::encode_weight;

    fn zero_sum_filter() -> Filter {
        Filter::from_fn(|i, j| encode_weight(if (i + j) % 2 == 0 { 3 } else { -3 }).unwrap())
    }

    #[test]
    fn uniform_scene_zero_sum_kernel() {
        let scene = Grid::filled(ARRAY_SIZE, ARRAY_SIZE, 700.0);
        let bank = FilterBank::new(vec![zero_sum_filter()]).unwrap();
        for (ds, stride) in [(1, 16), (2, 8), (4, 4)] {
            let cfg = ConvConfig {
                ds,
                stride,
                n_filt: 1,
                ..ConvConfig::default()
            };
            let out = run_feature_extraction(&scene, &bank, &cfg, &SimParams::ideal(), &NoiseContext::noiseless())
                .unwrap();
            assert!(out.maps[0].codes.as_slice().iter().all(|&c| c == 128), "ds={ds}");
            assert_eq!(out.maps[0].std, 0.0);
        }
    }

    #[test]
    fn dark_scene_images_near_zero() {
        let scene = Grid::filled(ARRAY_SIZE, ARRAY_SIZE, 0.0);
        let img = run_imaging(&scene, &ConvConfig::default(), &SimParams::ideal(), &NoiseContext::noiseless())
            .unwrap();
        // Only the dark-current floor remains.
        assert!(img.as_slice().iter().all(|&c| c <= 4));
    }

    #[test]
    fn bank_capacity() {
        let f = zero_sum_filter();
        assert!(FilterBank::new(vec![f.clone(); 32]).is_ok());
        assert!(matches!(FilterBank::new(vec![f; 33]), Err(Error::BankCapacity(33))));
    }

    #[test]
    fn config_validation() {
        let bad = ConvConfig {
            ds: 3,
            ..ConvConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(ConvConfig::default().validate().is_ok());
    }
}
