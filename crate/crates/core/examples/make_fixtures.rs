//! Regenerates the bundled face-detection fixtures.
//!
//! `cargo run --example make_fixtures -- [dir]` writes `face_scene.pgm`,
//! `face_truth.pgm` and `face_detector.mfb`, then prints how the detector
//! scores on the scene.

use std::path::PathBuf;

use nearsensor::adc::OffsetRegister;
use nearsensor::io::filters::save_filters;
use nearsensor::io::pgm::write_pgm;
use nearsensor::noise::NoiseContext;
use nearsensor::params::SimParams;
use nearsensor::pipeline::reference::{reference_convolution, NominalTransfer};
use nearsensor::pipeline::{ConvConfig, Filter, FilterBank, Mode, FILTER_SIZE};
use nearsensor::roi::{detection_metrics, reference_detection, run_roi, FcHead};
use nearsensor::scenes;

const SCENE_SEED: u64 = 11;

/// Kernel with weight `w` inside a rectangle (rows r0..r1, cols c0..c1).
fn block(r0: usize, r1: usize, c0: usize, c1: usize, w: i32) -> Vec<i32> {
    let mut v = vec![0; FILTER_SIZE * FILTER_SIZE];
    for r in r0..r1 {
        for c in c0..c1 {
            v[r * FILTER_SIZE + c] = w;
        }
    }
    v
}

/// Bright center band against its left and right flanks, zero-sum.
fn center_surround(w: i32) -> Vec<i32> {
    let mut v = vec![0; FILTER_SIZE * FILTER_SIZE];
    for r in 4..12 {
        for c in 0..FILTER_SIZE {
            v[r * FILTER_SIZE + c] = if (4..12).contains(&c) { w } else { -w };
        }
    }
    v
}

/// Offset making the 1b output fire when `Σ w·code` exceeds `level`.
fn offset_for(values: &[i32], level: f64, t: &NominalTransfer, full_scale: f64) -> OffsetRegister {
    let wsum: i32 = values.iter().sum();
    let lsb = full_scale / 256.0;
    let code = -((t.v_sh(level, wsum) - full_scale / 2.0) / lsb).round();
    OffsetRegister(code.clamp(-128.0, 127.0) as i8)
}

fn main() -> nearsensor::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures"));
    std::fs::create_dir_all(&dir).map_err(|e| nearsensor::Error::Precondition(e.to_string()))?;
    let params = SimParams::ideal();
    let cfg = ConvConfig {
        mode: Mode::Roi,
        ds: 2,
        stride: 2,
        n_filt: 16,
        fmap_bits: 1,
        ..ConvConfig::default()
    };
    let transfer = NominalTransfer::new(&params, cfg.t_exp);
    let fs = params.adc.full_scale;

    // (kernel, mean level over its nonzero support, head weight)
    let mean_test = |v: Vec<i32>, mean: f64| {
        let s: i32 = v.iter().sum();
        (v, f64::from(s) * mean)
    };
    let mut specs: Vec<(Vec<i32>, f64, i8)> = Vec::new();
    for (mean, hw) in [(120.0, 2), (150.0, 3), (180.0, 3)] {
        let (v, l) = mean_test(block(4, 12, 4, 12, 3), mean);
        specs.push((v, l, hw));
    }
    for (mean, hw) in [(110.0, 2), (140.0, 2)] {
        let (v, l) = mean_test(block(0, 16, 0, 16, 1), mean);
        specs.push((v, l, hw));
    }
    for v in [block(0, 8, 0, 16, 1), block(8, 16, 0, 16, 1), block(0, 16, 0, 8, 2), block(0, 16, 8, 16, 2)] {
        let (v, l) = mean_test(v, 130.0);
        specs.push((v, l, 1));
    }
    for v in [block(0, 8, 0, 8, 2), block(0, 8, 8, 16, 2), block(8, 16, 0, 8, 2), block(8, 16, 8, 16, 2)] {
        let (v, l) = mean_test(v, 130.0);
        specs.push((v, l, 1));
    }
    // Center brighter than its flanks: 64 px each side, levels in code sums.
    specs.push((center_surround(2), 2.0 * 64.0 * 0.0, 2));
    specs.push((center_surround(2), 2.0 * 64.0 * 40.0, 2));
    // Very dark center argues against a face.
    let (v, l) = mean_test(block(6, 10, 6, 10, -3), 50.0);
    specs.push((v, l, -4));

    let filters: Vec<Filter> = specs
        .iter()
        .map(|(v, level, _)| Filter::from_values(v, offset_for(v, *level, &transfer, fs)))
        .collect::<nearsensor::Result<_>>()?;
    let head = FcHead {
        weights: specs.iter().map(|s| s.2).collect(),
        bias: -8,
    };
    let bank = FilterBank::new(filters.clone())?.with_head(head);

    let (image, face) = scenes::face(SCENE_SEED);
    let n_f = cfg.fmap_size()?;
    let truth = scenes::face_truth(&face, n_f, cfg.ds, cfg.stride);

    // Every decision must clear its threshold by a margin, so float
    // rounding cannot flip a bit between the chip and the reference.
    let refs = reference_convolution(&image, &filters, cfg.ds, cfg.stride)?;
    let mut min_margin = f64::INFINITY;
    for (r, f) in refs.iter().zip(&filters) {
        let wsum: i32 = f.values().iter().sum();
        for &x in r.as_slice() {
            let node = transfer.v_sh(x, wsum) + f.offset.volts(fs);
            min_margin = min_margin.min((node - fs / 2.0).abs());
        }
    }

    let scene = params.scene.apply(&image);
    let (maps, det) = run_roi(&scene, &bank, &cfg, &params, &NoiseContext::noiseless())?;
    let reference = reference_detection(&image, &bank, &cfg, &params)?;
    let m = detection_metrics(&det.detection, &truth)?;
    let positives = truth.as_slice().iter().filter(|&&t| t == 1).count();
    println!("truth positives: {positives} / {}", n_f * n_f);
    println!("discard {:.2}%  fnr {:.2}%  tnr {:.2}%", 100.0 * m.discard, 100.0 * m.fnr, 100.0 * m.tnr);
    println!("min decision margin {:.3} mV", 1e3 * min_margin);
    println!("saturated psums {}", maps.saturated_psums);
    println!("matches reference: {}", det.detection == reference.detection);

    write_pgm(dir.join("face_scene.pgm"), &image, None)?;
    write_pgm(dir.join("face_truth.pgm"), &truth.map(|&t| t * 255), None)?;
    save_filters(dir.join("face_detector.mfb"), &bank)?;
    Ok(())
}
