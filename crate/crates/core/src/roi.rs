//! Region-of-interest head: combines 1b feature maps into a heatmap and a
//! binary detection map, and scores it against ground truth.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::noise::NoiseContext;
use crate::params::SimParams;
use crate::pipeline::reference::{reference_convolution, NominalTransfer};
use crate::pipeline::{run_feature_extraction, ConvConfig, FeatureMaps, FilterBank};

/// Operations per location on top of the multiply-adds (bias, comparison).
pub const FC_OVERHEAD_OPS: usize = 2;

/// Fully-connected weights read from a filter file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FcHead {
    pub weights: Vec<i8>,
    pub bias: i32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoiHead {
    pub fc: FcHead,
    pub threshold: i32,
}

impl RoiHead {
    pub fn new(fc: FcHead) -> Self {
        Self { fc, threshold: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionMetrics {
    pub fnr: f64,
    pub tnr: f64,
    /// Fraction of locations predicted negative.
    pub discard: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub heatmap: Grid<i32>,
    pub detection: Grid<u8>,
}

/// Weighted sum of the bit maps plus bias, thresholded.
pub fn fc_combine(bit_fmaps: &[Grid<u8>], head: &RoiHead) -> Result<DetectionResult> {
    if bit_fmaps.len() != head.fc.weights.len() {
        return Err(Error::Dimension {
            expected: format!("{} fmaps", head.fc.weights.len()),
            got: format!("{} fmaps", bit_fmaps.len()),
        });
    }
    let Some(first) = bit_fmaps.first() else {
        return Err(Error::Precondition("no feature maps to combine".into()));
    };
    let shape = first.shape();
    if let Some(bad) = bit_fmaps.iter().find(|g| g.shape() != shape) {
        return Err(Error::Dimension {
            expected: format!("{shape:?}"),
            got: format!("{:?}", bad.shape()),
        });
    }
    let heatmap = Grid::from_fn(shape.0, shape.1, |r, c| {
        bit_fmaps
            .iter()
            .zip(&head.fc.weights)
            .map(|(g, &w)| i32::from(w) * i32::from(*g.get(r, c)))
            .sum::<i32>()
            + head.fc.bias
    });
    let detection = heatmap.map(|&h| u8::from(h >= head.threshold));
    Ok(DetectionResult { heatmap, detection })
}

/// Off-chip operations per frame for an `n_f` x `n_f` grid of `n_filt` inputs.
pub fn fc_op_count(n_f: usize, n_filt: usize) -> usize {
    n_f * n_f * (2 * n_filt + FC_OVERHEAD_OPS)
}

pub fn detection_metrics(pred: &Grid<u8>, truth: &Grid<u8>) -> Result<DetectionMetrics> {
    if pred.shape() != truth.shape() {
        return Err(Error::Dimension {
            expected: format!("{:?}", truth.shape()),
            got: format!("{:?}", pred.shape()),
        });
    }
    let (mut tp, mut fp, mut tn, mut fne) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.as_slice().iter().zip(truth.as_slice()) {
        match (p != 0, t != 0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fne += 1,
        }
    }
    if tp + fne == 0 {
        return Err(Error::NoPositives);
    }
    let total = pred.as_slice().len() as f64;
    Ok(DetectionMetrics {
        fnr: fne as f64 / (tp + fne) as f64,
        tnr: if tn + fp == 0 { 1.0 } else { tn as f64 / (tn + fp) as f64 },
        discard: (tn + fne) as f64 / total,
    })
}

fn head_of(bank: &FilterBank, cfg: &ConvConfig) -> Result<RoiHead> {
    let fc = bank
        .head()
        .ok_or_else(|| Error::Precondition("filter bank has no FCHEAD section".into()))?;
    if fc.weights.len() != cfg.n_filt {
        return Err(Error::Dimension {
            expected: format!("{} head weights", cfg.n_filt),
            got: fc.weights.len().to_string(),
        });
    }
    Ok(RoiHead::new(fc.clone()))
}

fn bit_maps(maps: &FeatureMaps) -> Vec<Grid<u8>> {
    maps.maps.iter().map(|m| m.codes.map(|&c| u8::from(c != 0))).collect()
}

/// Simulated detection: 1b feature extraction followed by the head.
pub fn run_roi(
    scene: &Grid<f64>,
    bank: &FilterBank,
    cfg: &ConvConfig,
    params: &SimParams,
    ctx: &NoiseContext,
) -> Result<(FeatureMaps, DetectionResult)> {
    let head = head_of(bank, cfg)?;
    let maps = run_feature_extraction(scene, bank, cfg, params, ctx)?;
    let det = fc_combine(&bit_maps(&maps), &head)?;
    Ok((maps, det))
}

/// Software detection: reference convolution mapped through the nominal
/// voltage transfer, thresholded at the 1b decision level.
pub fn reference_detection(
    image: &Grid<u8>,
    bank: &FilterBank,
    cfg: &ConvConfig,
    params: &SimParams,
) -> Result<DetectionResult> {
    cfg.validate()?;
    let head = head_of(bank, cfg)?;
    let filters = &bank.filters()[..cfg.n_filt];
    let refs = reference_convolution(image, filters, cfg.ds, cfg.stride)?;
    let transfer = NominalTransfer::new(params, cfg.t_exp);
    let threshold = params.adc.full_scale / 2.0;
    let bits: Vec<Grid<u8>> = refs
        .iter()
        .zip(filters)
        .map(|(r, f)| {
            let wsum: i32 = f.values().iter().sum();
            r.map(|&x| {
                let node = transfer.v_sh(x, wsum) + f.offset.volts(params.adc.full_scale);
                u8::from(node >= threshold)
            })
        })
        .collect();
    fc_combine(&bits, &head)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(weights: Vec<i8>, bias: i32) -> RoiHead {
        RoiHead::new(FcHead { weights, bias })
    }

    #[test]
    fn zero_maps_give_bias() {
        let maps = vec![Grid::filled(4, 4, 0u8); 16];
        let r = fc_combine(&maps, &head(vec![5; 16], -3)).unwrap();
        assert!(r.heatmap.as_slice().iter().all(|&h| h == -3));
    }

    #[test]
    fn single_ones_map() {
        let r = fc_combine(&[Grid::filled(3, 3, 1u8)], &head(vec![1], 0)).unwrap();
        assert!(r.heatmap.as_slice().iter().all(|&h| h == 1));
    }

    #[test]
    fn shape_mismatch() {
        let maps = vec![Grid::filled(3, 3, 1u8), Grid::filled(3, 4, 1u8)];
        assert!(fc_combine(&maps, &head(vec![1, 1], 0)).is_err());
    }

    #[test]
    fn op_count() {
        assert_eq!(fc_op_count(25, 16), 21_250);
    }

    #[test]
    fn metrics_examples() {
        let truth = Grid::from_fn(5, 5, |r, c| u8::from(r < 2 && c < 2));
        let m = detection_metrics(&truth, &truth).unwrap();
        assert_eq!((m.fnr, m.tnr), (0.0, 1.0));
        let zeros = Grid::filled(5, 5, 0u8);
        let m = detection_metrics(&zeros, &truth).unwrap();
        assert_eq!((m.fnr, m.discard), (1.0, 1.0));
        assert!(matches!(detection_metrics(&truth, &zeros), Err(Error::NoPositives)));
    }
}
