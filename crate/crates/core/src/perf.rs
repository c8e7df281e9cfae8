//! Analytical performance metrics and the measured power table.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::pipeline::FILTER_SIZE;
use crate::ARRAY_SIZE;

/// Output side length of a feature map.
pub fn fmap_size(ds: usize, stride: usize) -> Result<usize> {
    if !matches!(ds, 1 | 2 | 4) || stride == 0 {
        return Err(Error::UnsupportedConfig(format!("ds={ds}, stride={stride}")));
    }
    let width = ARRAY_SIZE / ds;
    if width < FILTER_SIZE {
        return Err(Error::UnsupportedConfig(format!(
            "ds={ds} leaves a {width}-pixel image, smaller than the filter"
        )));
    }
    if (width - FILTER_SIZE) % stride != 0 {
        return Err(Error::UnsupportedConfig(format!(
            "stride {stride} does not tile a {width}-pixel image"
        )));
    }
    Ok((width - FILTER_SIZE) / stride + 1)
}

/// Operations per second, counted in original-image pixel space
/// (each tap of a downsampled patch covers ds^2 pixels).
pub fn throughput(ds: usize, stride: usize, fps: f64, n_filt: usize) -> Result<f64> {
    let nf = fmap_size(ds, stride)? as f64;
    let ops_per_patch = 2.0 * (FILTER_SIZE * FILTER_SIZE) as f64 * (ds * ds) as f64;
    Ok(fps * n_filt as f64 * nf * nf * ops_per_patch)
}

/// Resolutions used to normalize energy to 1b operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCountBasis {
    pub b_x: u32,
    pub b_w: u32,
}

impl Default for OpCountBasis {
    fn default() -> Self {
        Self { b_x: 1, b_w: 4 }
    }
}

/// Energy per 1b operation (J).
pub fn energy_per_op(
    power: f64,
    ds: usize,
    stride: usize,
    fps: f64,
    n_filt: usize,
    basis: OpCountBasis,
) -> Result<f64> {
    let t = throughput(ds, stride, fps, n_filt)?;
    if !(t > 0.0) {
        return Err(Error::Precondition("throughput must be positive".into()));
    }
    Ok(power / (t * f64::from(basis.b_x) * f64::from(basis.b_w)))
}

/// Energy efficiency in TOPS/W from energy per op in joules.
pub fn tops_per_watt(energy_per_op: f64) -> f64 {
    1.0 / energy_per_op / 1e12
}

/// SoC energy per pixel, frame and filter (J).
pub fn processing_energy(power_soc: f64, fps: f64, n_filt: usize) -> Result<f64> {
    if !(fps > 0.0) || n_filt == 0 {
        return Err(Error::Precondition("fps and filter count must be positive".into()));
    }
    Ok(power_soc / (fps * (ARRAY_SIZE * ARRAY_SIZE) as f64 * n_filt as f64))
}

/// Output bits as a fraction of the raw 8b frame.
pub fn data_reduction(ds: usize, stride: usize, n_filt: usize, fmap_bits: u32) -> Result<f64> {
    let nf = fmap_size(ds, stride)?;
    let bits = n_filt * nf * nf * fmap_bits as usize;
    Ok(bits as f64 / (ARRAY_SIZE * ARRAY_SIZE * 8) as f64)
}

/// Convolution operations per frame, in original-image pixel space.
pub fn conv_ops_per_frame(ds: usize, stride: usize, n_filt: usize) -> Result<f64> {
    throughput(ds, stride, 1.0, n_filt)
}

/// Mean and population standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn normalize(x: &[f64]) -> Result<Vec<f64>> {
    let (mean, sd) = mean_std(x);
    if !(sd > 0.0) {
        return Err(Error::UndefinedNormalization);
    }
    Ok(x.iter().map(|v| (v - mean) / sd).collect())
}

/// Normalized RMSE (%) between an ideal and a measured fmap.
///
/// Both maps are standardized; the RMS difference is then expressed against
/// the measured map's span, taken as twice its largest standardized magnitude.
pub fn rmse(ideal: &Grid<f64>, measured: &Grid<f64>) -> Result<f64> {
    if ideal.shape() != measured.shape() {
        return Err(Error::Dimension {
            expected: format!("{:?}", ideal.shape()),
            got: format!("{:?}", measured.shape()),
        });
    }
    let a = normalize(ideal.as_slice())?;
    let b = normalize(measured.as_slice())?;
    let msd = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64;
    let peak = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(100.0 / (2.0 * peak) * msd.sqrt())
}

/// Supported (ds, stride) pairs in table order.
pub const TABLE_CONFIGS: [(usize, usize); 12] = [
    (1, 2),
    (1, 4),
    (1, 8),
    (1, 16),
    (2, 2),
    (2, 4),
    (2, 8),
    (2, 16),
    (4, 2),
    (4, 4),
    (4, 8),
    (4, 16),
];

/// Measured operating point of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredPoint {
    pub ds: usize,
    pub stride: usize,
    pub fps: f64,
    /// W.
    pub power_acc: f64,
    /// W.
    pub power_soc: f64,
}

/// Share of SoC power per block, for reporting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerBreakdown {
    pub controller: f64,
    pub cpu: f64,
    pub dma: f64,
    pub dcmi: f64,
    pub vddah: f64,
    pub vddal: f64,
    pub other: f64,
}

impl PowerBreakdown {
    /// Imaging mode, 29 fps.
    pub fn imaging() -> Self {
        Self {
            controller: 0.38,
            cpu: 0.25,
            dma: 0.13,
            dcmi: 0.0,
            vddah: 0.17,
            vddal: 0.05,
            other: 0.02,
        }
    }

    pub fn total(&self) -> f64 {
        self.controller + self.cpu + self.dma + self.dcmi + self.vddah + self.vddal + self.other
    }
}

/// Measured power per configuration, four filters, 12.5 ms exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub name: String,
    pub n_filt: usize,
    pub points: Vec<MeasuredPoint>,
    pub imaging_breakdown: PowerBreakdown,
}

impl PowerProfile {
    pub fn measured() -> Self {
        const FPS: [f64; 12] = [
            18.2, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7, 79.7,
        ];
        const ACC_UW: [f64; 12] = [
            66.84, 76.20, 22.36, 8.40, 58.74, 17.40, 6.60, 4.03, 10.07, 4.42, 3.29, 2.70,
        ];
        const SOC_UW: [f64; 12] = [
            338.5, 384.7, 297.4, 268.9, 357.0, 288.0, 264.7, 256.3, 271.9, 258.3, 253.3, 250.9,
        ];
        let points = TABLE_CONFIGS
            .iter()
            .enumerate()
            .map(|(i, &(ds, stride))| MeasuredPoint {
                ds,
                stride,
                fps: FPS[i],
                power_acc: ACC_UW[i] * 1e-6,
                power_soc: SOC_UW[i] * 1e-6,
            })
            .collect();
        Self {
            name: "measured".into(),
            n_filt: 4,
            points,
            imaging_breakdown: PowerBreakdown::imaging(),
        }
    }

    pub fn point(&self, ds: usize, stride: usize) -> Option<&MeasuredPoint> {
        self.points.iter().find(|p| p.ds == ds && p.stride == stride)
    }
}

/// Derived metrics of one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerfRow {
    pub ds: usize,
    pub stride: usize,
    pub fps: f64,
    /// MOPS.
    pub throughput_mops: f64,
    pub power_acc_uw: f64,
    pub ee_acc_tops_w: f64,
    pub energy_acc_fj: f64,
    pub power_soc_uw: f64,
    pub ee_soc_tops_w: f64,
    pub energy_soc_pj: f64,
    /// pJ per pixel, frame and filter.
    pub processing_pj: f64,
}

pub fn perf_row(point: &MeasuredPoint, n_filt: usize, basis: OpCountBasis) -> Result<PerfRow> {
    let (ds, s, fps) = (point.ds, point.stride, point.fps);
    let e_acc = energy_per_op(point.power_acc, ds, s, fps, n_filt, basis)?;
    let e_soc = energy_per_op(point.power_soc, ds, s, fps, n_filt, basis)?;
    Ok(PerfRow {
        ds,
        stride: s,
        fps,
        throughput_mops: throughput(ds, s, fps, n_filt)? / 1e6,
        power_acc_uw: point.power_acc * 1e6,
        ee_acc_tops_w: tops_per_watt(e_acc),
        energy_acc_fj: e_acc * 1e15,
        power_soc_uw: point.power_soc * 1e6,
        ee_soc_tops_w: tops_per_watt(e_soc),
        energy_soc_pj: e_soc * 1e12,
        processing_pj: processing_energy(point.power_soc, fps, n_filt)? * 1e12,
    })
}

pub fn perf_table(profile: &PowerProfile, basis: OpCountBasis) -> Result<Vec<PerfRow>> {
    profile
        .points
        .iter()
        .map(|p| perf_row(p, profile.n_filt, basis))
        .collect()
}

pub const PERF_CSV_HEADER: &str = "ds,stride,fps,throughput_mops,power_acc_uw,ee_acc_tops_w,energy_acc_fj,power_soc_uw,ee_soc_tops_w,energy_soc_pj,processing_pj";

impl PerfRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{:.1},{:.1},{:.2},{:.2},{:.1},{:.1},{:.2},{:.2},{:.1}",
            self.ds,
            self.stride,
            self.fps,
            self.throughput_mops,
            self.power_acc_uw,
            self.ee_acc_tops_w,
            self.energy_acc_fj,
            self.power_soc_uw,
            self.ee_soc_tops_w,
            self.energy_soc_pj,
            self.processing_pj
        )
    }
}
