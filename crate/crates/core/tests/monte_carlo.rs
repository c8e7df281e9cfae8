//! Statistical checks over many seeded noise realizations.

use nearsensor::ds3::ds3_process_block;
use nearsensor::grid::Grid;
use nearsensor::mac::{encode_weight, psum_row, MacCaps, MacParams, Weight4b};
use nearsensor::noise::{NoiseContext, NoiseFlags, Stream, GROUPS};
use nearsensor::params::{Profile, SimParams};
use nearsensor::pipeline::{run_imaging, ConvConfig};
use nearsensor::sensor::expose;
use nearsensor::ARRAY_SIZE;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CONTEXTS: u64 = 300;

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Psum of every instance, for every amplifier of `CONTEXTS` mismatch draws.
fn mismatch_samples(instances: &[(Vec<f64>, Vec<Weight4b>)]) -> Vec<Vec<f64>> {
    let p = MacParams::default();
    let flags = NoiseFlags {
        mac_mismatch: true,
        ..NoiseFlags::none()
    };
    let mut out = vec![Vec::new(); instances.len()];
    for seed in 0..CONTEXTS {
        let ctx = NoiseContext::new(1000 + seed, flags);
        let mut rng = ctx.stream(Stream::Trial, 0);
        for g in 0..GROUPS {
            let caps = MacCaps::for_group(g, &p, &ctx);
            for (k, (v, w)) in instances.iter().enumerate() {
                out[k].push(psum_row(v, w, &p, &caps, &ctx, &mut rng).unwrap().unclamped);
            }
        }
    }
    out
}

#[test]
fn mac_mismatch_sigma_band() {
    // Full-magnitude weights with random signs over the buffered input range,
    // sorted by nominal output to span the valid swing.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let instances: Vec<(Vec<f64>, Vec<Weight4b>)> = (0..24)
        .map(|_| {
            let v: Vec<f64> = (0..16).map(|_| rng.random_range(0.5..0.97)).collect();
            let w = (0..16)
                .map(|_| encode_weight(if rng.random_bool(0.5) { 7 } else { -7 }).unwrap())
                .collect();
            (v, w)
        })
        .collect();
    let samples = mismatch_samples(&instances);
    let mut sigmas = Vec::new();
    for s in &samples {
        let (m, sd) = mean_std(s);
        println!("v_mac {m:.4} V  sigma {:.3} mV", sd * 1e3);
        sigmas.push(sd);
    }
    let (avg, _) = mean_std(&sigmas);
    println!("mean sigma {:.3} mV", avg * 1e3);
    assert!((0.6e-3..=1.0e-3).contains(&avg), "mean sigma {avg}");
    for (s, (v, w)) in sigmas.iter().zip(&instances) {
        let p = MacParams::default();
        let nominal = psum_row(v, w, &p, &MacCaps::nominal(), &NoiseContext::noiseless(), &mut ChaCha8Rng::seed_from_u64(0))
            .unwrap()
            .unclamped;
        if (p.clamp_lo..=p.clamp_hi).contains(&nominal) {
            assert!((0.6e-3..=1.0e-3).contains(s), "sigma {s} at {nominal} V");
        }
    }
}

#[test]
fn balanced_row_stays_below_one_millivolt() {
    let v: Vec<f64> = (0..16).map(|i| if i < 8 { 1.0 } else { 0.9 }).collect();
    let w: Vec<Weight4b> = (0..16).map(|i| encode_weight(if i < 8 { 7 } else { -7 }).unwrap()).collect();
    let samples = mismatch_samples(&[(v, w)]);
    let (m, sd) = mean_std(&samples[0]);
    println!("balanced row: mean {m:.5} V sigma {:.3} mV", sd * 1e3);
    assert!((m - 0.6875).abs() < 1e-4);
    assert!(sd <= 1.0e-3, "{sd}");
}

fn uniform(lx: f64) -> Grid<f64> {
    Grid::filled(ARRAY_SIZE, ARRAY_SIZE, lx)
}

fn code_stats(img: &Grid<u8>) -> (f64, f64) {
    let xs: Vec<f64> = img.as_slice().iter().map(|&c| f64::from(c)).collect();
    mean_std(&xs)
}

#[test]
fn imaging_fixed_pattern_at_half_scale() {
    let params = SimParams::calibrated();
    let cfg = ConvConfig {
        t_exp: 20e-3,
        ..ConvConfig::default()
    };
    let ctx = NoiseContext::new(17, Profile::Calibrated.flags());
    let img = run_imaging(&uniform(750.0), &cfg, &params, &ctx).unwrap();
    let (mean, total) = code_stats(&img);
    // Temporal part from the difference of two frames with the same static draws.
    let again = run_imaging(&uniform(750.0), &cfg, &params, &ctx.with_frame(1)).unwrap();
    let diff: Vec<f64> = img
        .as_slice()
        .iter()
        .zip(again.as_slice())
        .map(|(&a, &b)| f64::from(a) - f64::from(b))
        .collect();
    let temporal = mean_std(&diff).1 / 2f64.sqrt();
    let fixed = (total * total - temporal * temporal).max(0.0).sqrt();
    let fs = 256.0;
    println!(
        "mean {mean:.1}  total {:.2}%FS  fixed {:.2}%FS  temporal {:.2}%FS",
        100.0 * total / fs,
        100.0 * fixed / fs,
        100.0 * temporal / fs
    );
    assert!((110.0..=150.0).contains(&mean), "mean code {mean}");
    assert!((fixed / fs - 0.0244).abs() < 0.0244 * 0.15);
    // Temporal noise includes quantization and the pixel kT/C term.
    assert!((temporal / fs - 0.0075).abs() < 0.0075 * 0.35);
}

/// SNR in dB of the delta-reset outputs of a uniform frame, dark level removed.
fn drs_snr(lx: f64, dark: f64, params: &SimParams, ctx: &NoiseContext) -> f64 {
    let raw = expose(&uniform(lx), 20e-3, &params.pixel, ctx).unwrap();
    let mut xs = Vec::with_capacity(ARRAY_SIZE * ARRAY_SIZE);
    for r in 0..ARRAY_SIZE {
        xs.extend(ds3_process_block(&raw, r, 1, &params.ds3, ctx).unwrap());
    }
    let (m, sd) = mean_std(&xs);
    20.0 * ((m - dark) / sd).log10()
}

#[test]
fn snr_slope_and_plateau() {
    let params = SimParams::calibrated();
    let ctx = NoiseContext::new(23, Profile::Calibrated.flags());
    let raw = expose(&uniform(0.0), 20e-3, &params.pixel, &ctx.with_flags(NoiseFlags::none())).unwrap();
    let dark = ds3_process_block(&raw, 0, 1, &params.ds3, &NoiseContext::noiseless()).unwrap()[0];
    let snr = |lx: f64| drs_snr(lx, dark, &params, &ctx);
    let (lo, mid) = (snr(2.0), snr(20.0));
    let (hi_a, hi_b) = (snr(300.0), snr(1200.0));
    let tn_slope = mid - lo;
    let plateau_slope = (hi_b - hi_a) / 4f64.log10();
    println!("SNR 2 lx {lo:.1} dB, 20 lx {mid:.1} dB, 300 lx {hi_a:.1} dB, 1200 lx {hi_b:.1} dB");
    println!("slope {tn_slope:.2} dB/decade (read-noise limited), {plateau_slope:.2} dB/decade (PRNU limited)");
    assert!((tn_slope - 20.0).abs() < 3.0);
    assert!(plateau_slope < 6.0);
    // Ceiling set by the gain spread alone.
    let ceiling = -20.0 * (2.0 * params.pixel.prnu_sigma).log10();
    assert!(hi_b < ceiling + 0.5 && hi_b > ceiling - 3.0, "{hi_b} vs {ceiling}");
}
