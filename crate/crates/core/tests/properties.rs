//! Invariants of the signal chain, checked on random instances.

use nearsensor::adc::{charge_share, sar_convert, AdcParams, OffsetRegister, SarAdc};
use nearsensor::ds3::{ds3_process_block, Ds3Params};
use nearsensor::grid::Grid;
use nearsensor::io::config::{parse_config, RunConfig};
use nearsensor::io::filters::{format_filters, parse_filters};
use nearsensor::mac::{encode_weight, psum_row, psum_row_oracle, MacCaps, MacParams, Weight4b};
use nearsensor::memory::{retention_ok, storage_pattern, MemoryParams};
use nearsensor::noise::{NoiseContext, NoiseFlags, Stream};
use nearsensor::params::{Profile, SimParams};
use nearsensor::perf::{data_reduction, rmse, TABLE_CONFIGS};
use nearsensor::pipeline::schedule::stride_schedule;
use nearsensor::pipeline::{run_feature_extraction, ConvConfig, Filter, FilterBank};
use nearsensor::roi::{fc_combine, FcHead, RoiHead};
use nearsensor::sensor::{expose, PixelParams};
use nearsensor::{scenes, ARRAY_SIZE};
use proptest::prelude::*;

fn weights() -> impl Strategy<Value = Vec<i32>> {
    prop::collection::vec(-7i32..=7, 16)
}

fn inputs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.2, 16)
}

fn encode(w: &[i32]) -> Vec<Weight4b> {
    w.iter().map(|&x| encode_weight(x).unwrap()).collect()
}

fn psum(v: &[f64], w: &[i32], p: &MacParams) -> f64 {
    let ctx = NoiseContext::noiseless();
    let mut rng = ctx.stream(Stream::Trial, 0);
    psum_row(v, &encode(w), p, &MacCaps::nominal(), &ctx, &mut rng).unwrap().unclamped
}

proptest! {
    #[test]
    fn psum_affine_in_inputs(v1 in inputs(), v2 in inputs(), w in weights(), a in 0.0f64..1.0) {
        let p = MacParams::default();
        let mix: Vec<f64> = v1.iter().zip(&v2).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        let lhs = psum(&mix, &w, &p);
        let rhs = a * psum(&v1, &w, &p) + (1.0 - a) * psum(&v2, &w, &p);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn psum_additive_in_weights(v in inputs(), w1 in prop::collection::vec(-3i32..=3, 16), w2 in prop::collection::vec(-4i32..=4, 16)) {
        let p = MacParams::default();
        let sum: Vec<i32> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let lhs = psum(&v, &sum, &p) - p.v_cm;
        let rhs = (psum(&v, &w1, &p) - p.v_cm) + (psum(&v, &w2, &p) - p.v_cm);
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn psum_matches_dot_product(v in inputs(), w in weights()) {
        let p = MacParams::default();
        let dot: f64 = v.iter().zip(&w).map(|(x, &k)| x * f64::from(k)).sum();
        prop_assert!((psum(&v, &w, &p) - (p.v_cm + dot / 64.0)).abs() < 1e-12);
    }

    #[test]
    fn oracle_ignores_amplifier_offset(v in inputs(), w in weights(), v_a in -0.05f64..0.05) {
        let p = MacParams::default();
        let caps = MacCaps::nominal();
        let w = encode(&w);
        let a = psum_row_oracle(&v, &w, &p, &caps, 0.0).unwrap();
        let b = psum_row_oracle(&v, &w, &p, &caps, v_a).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn psum_is_ratiometric(v in inputs(), w in weights(), k in 0.1f64..10.0) {
        let p = MacParams::default();
        let scaled = MacParams { c_u: p.c_u * k, ..p.clone() };
        prop_assert!((psum(&v, &w, &p) - psum(&v, &w, &scaled)).abs() < 1e-12);
    }

    #[test]
    fn charge_share_permutation_and_bounds(mut v in prop::collection::vec(0.0f64..1.2, 16), seed in any::<u64>()) {
        let a = charge_share(&v).unwrap();
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(a >= lo - 1e-15 && a <= hi + 1e-15);
        // Deterministic shuffle from the seed.
        let n = v.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.swap(i, (s >> 33) as usize % (i + 1));
        }
        prop_assert!((charge_share(&v).unwrap() - a).abs() < 1e-15);
    }

    #[test]
    fn sar_monotone(a in 0.0f64..1.2, b in 0.0f64..1.2, o in any::<i8>(), bits in prop::sample::select(vec![1u32, 2, 4, 8])) {
        let p = AdcParams::default().with_resolution(bits);
        let adc = SarAdc::ideal();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sar_convert(lo, OffsetRegister(o), &p, &adc) <= sar_convert(hi, OffsetRegister(o), &p, &adc));
    }

    #[test]
    fn sar_offset_equivalence(v in 0.0f64..1.2, o in any::<i8>()) {
        let p = AdcParams::default();
        let adc = SarAdc::ideal();
        let off = OffsetRegister(o);
        let shifted = (v + off.volts(p.full_scale)).clamp(0.0, p.full_scale);
        prop_assert_eq!(sar_convert(v, off, &p, &adc), sar_convert(shifted, OffsetRegister(0), &p, &adc));
    }

    #[test]
    fn rmse_affine_invariant(x in prop::collection::vec(-100.0f64..100.0, 9..64), y_noise in prop::collection::vec(-5.0f64..5.0, 64), a in 0.1f64..10.0, b in -50.0f64..50.0) {
        let n = x.len();
        let g = Grid::from_vec(1, n, x.clone()).unwrap();
        let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assume!(spread > 1e-3);
        let y = Grid::from_vec(1, n, x.iter().zip(&y_noise).map(|(v, e)| v + e).collect()).unwrap();
        let ay = y.map(|v| a * v + b);
        let ax = g.map(|v| a * v + b);
        let base = rmse(&g, &y).unwrap();
        prop_assert!((rmse(&g, &ay).unwrap() - base).abs() < 1e-9);
        prop_assert!((rmse(&ax, &y).unwrap() - base).abs() < 1e-9);
        prop_assert!(rmse(&g, &ax).unwrap() < 1e-9);
    }

    #[test]
    fn head_linear_in_weights(bits in prop::collection::vec(0u8..=1, 4 * 9), w1 in prop::collection::vec(-60i8..60, 4), w2 in prop::collection::vec(-60i8..60, 4)) {
        let maps: Vec<Grid<u8>> = bits.chunks(9).map(|c| Grid::from_vec(3, 3, c.to_vec()).unwrap()).collect();
        let heat = |w: Vec<i8>| fc_combine(&maps, &RoiHead::new(FcHead { weights: w, bias: 0 })).unwrap().heatmap;
        let sum: Vec<i8> = w1.iter().zip(&w2).map(|(a, b)| a + b).collect();
        let (h1, h2, hs) = (heat(w1), heat(w2), heat(sum));
        for i in 0..9 {
            prop_assert_eq!(hs.as_slice()[i], h1.as_slice()[i] + h2.as_slice()[i]);
        }
    }

    #[test]
    fn config_echo_round_trips(ds in prop::sample::select(vec![1usize, 2, 4]), stride in prop::sample::select(vec![2usize, 4, 8, 16]), seed in any::<u64>(), sigma in 0.0f64..0.05, t_exp in 1e-4f64..0.1, calibrated in any::<bool>()) {
        let text = format!(
            "profile = {}\nds = {ds}\nstride = {stride}\nseed = {seed}\nmac.cap_mismatch_sigma = {sigma}\nt_exp = {t_exp}\n",
            if calibrated { "calibrated" } else { "ideal" }
        );
        let cfg: RunConfig = parse_config(&text, "p").unwrap();
        let back = parse_config(&cfg.echo(), "echo").unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn filter_file_round_trips(vals in prop::collection::vec(-7i32..=7, 256 * 3), offs in prop::collection::vec(any::<i8>(), 3), head in prop::option::of((prop::collection::vec(any::<i8>(), 16), -1000i32..1000))) {
        let filters: Vec<Filter> = vals
            .chunks(256)
            .zip(&offs)
            .map(|(v, &o)| Filter::from_values(v, OffsetRegister(o)).unwrap())
            .collect();
        let mut bank = FilterBank::new(filters).unwrap();
        if let Some((weights, bias)) = head {
            bank = bank.with_head(FcHead { weights, bias });
        }
        prop_assert_eq!(parse_filters(&format_filters(&bank), "p").unwrap(), bank);
    }

    #[test]
    fn retention_monotone(dt1 in 0.0f64..0.2, dt2 in 0.0f64..0.2) {
        let p = MemoryParams::typical();
        let (lo, hi) = if dt1 <= dt2 { (dt1, dt2) } else { (dt2, dt1) };
        prop_assert!(!retention_ok(hi, &p) || retention_ok(lo, &p));
    }

    #[test]
    fn data_reduction_counts_bits(n in 0usize..=32, bits in prop::sample::select(vec![1u32, 2, 4, 8]), cfg in prop::sample::select(TABLE_CONFIGS.to_vec())) {
        let bits_total = data_reduction(cfg.0, cfg.1, n, bits).unwrap() * 131_072.0;
        prop_assert!((bits_total - bits_total.round()).abs() < 1e-6);
    }
}

#[test]
fn schedule_covers_each_patch_once() {
    for (ds, s) in TABLE_CONFIGS {
        let sched = stride_schedule(ds, s).unwrap();
        let n_f = (128 / ds - 16) / s + 1;
        let mut seen = vec![0u8; n_f * n_f];
        for p in &sched {
            seen[p.patch_row * n_f + p.patch_col] += 1;
        }
        assert!(seen.iter().all(|&k| k == 1), "ds={ds} S={s}");
        // Windows served in one slot never share an amplifier group.
        let mut slots: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for p in &sched {
            slots.entry(p.slot).or_default().push(p.group);
        }
        for groups in slots.values() {
            let mut g = groups.clone();
            g.sort_unstable();
            g.dedup();
            assert_eq!(g.len(), groups.len());
        }
    }
}

#[test]
fn storage_layout_reproduces_image_columns() {
    for ds in [1, 2, 4] {
        let pattern = storage_pattern(ds).unwrap();
        let width = ARRAY_SIZE / ds;
        let row: Vec<f64> = (0..width).map(|c| c as f64).collect();
        let laid = pattern.layout(&row);
        for (m, &v) in laid.iter().enumerate() {
            let src = pattern.source(m);
            if let Some(c) = src.image_col {
                assert_eq!(v, c as f64, "ds={ds} col={m}");
            }
        }
    }
}

/// Direct evaluation of every patch from the DS3 outputs, without the
/// replicated memory or the slot plan: what a plain ds=1 schedule would do
/// on the downsampled image.
fn direct_codes(scene: &Grid<f64>, filter: &Filter, cfg: &ConvConfig, params: &SimParams) -> Grid<u16> {
    let ctx = NoiseContext::noiseless();
    let raw = expose(scene, cfg.t_exp, &params.pixel, &ctx).unwrap();
    let side = ARRAY_SIZE / cfg.ds;
    let m = &params.memory;
    let rows: Vec<Vec<f64>> = (0..side)
        .map(|r| {
            ds3_process_block(&raw, r * cfg.ds, cfg.ds, &params.ds3, &ctx)
                .unwrap()
                .into_iter()
                .map(|v| m.a_sf_mem * v + m.cubic_coeff * v * v * v + 0.0 + 0.0)
                .collect()
        })
        .collect();
    let n_f = cfg.fmap_size().unwrap();
    let adc = SarAdc::ideal();
    let adc_p = params.adc.with_resolution(cfg.fmap_bits);
    let mut rng = ctx.stream(Stream::Trial, 0);
    Grid::from_fn(n_f, n_f, |pr, pc| {
        let psums: Vec<f64> = (0..16)
            .map(|i| {
                let v = &rows[pr * cfg.stride + i][pc * cfg.stride..pc * cfg.stride + 16];
                psum_row(v, filter.row(i), &params.mac, &MacCaps::nominal(), &ctx, &mut rng).unwrap().v_mac
            })
            .collect();
        adc.convert(adc.charge_share(&psums).unwrap(), filter.offset, &adc_p)
    })
}

#[test]
fn replicas_match_direct_evaluation() {
    let params = SimParams::ideal();
    let img = scenes::dead_leaves(21);
    let scene = params.scene.apply(&img);
    let filter = Filter::from_fn(|i, j| encode_weight(((i * 7 + j * 3) % 7) as i32 - 3).unwrap());
    let bank = FilterBank::new(vec![filter.clone()]).unwrap();
    for (ds, stride) in TABLE_CONFIGS {
        let cfg = ConvConfig {
            ds,
            stride,
            n_filt: 1,
            ..ConvConfig::default()
        };
        let out = run_feature_extraction(&scene, &bank, &cfg, &params, &NoiseContext::noiseless()).unwrap();
        assert_eq!(out.maps[0].codes, direct_codes(&scene, &filter, &cfg, &params), "ds={ds} S={stride}");
    }
}

#[test]
fn downsampling_averages_pixels() {
    let params = SimParams::ideal();
    let img = scenes::natural(4);
    let ctx = NoiseContext::noiseless();
    let raw = expose(&params.scene.apply(&img), 12.5e-3, &PixelParams::default(), &ctx).unwrap();
    let p = Ds3Params::default();
    for ds in [2, 4] {
        for rb in (0..ARRAY_SIZE).step_by(ds * 9) {
            let block = ds3_process_block(&raw, rb, ds, &p, &ctx).unwrap();
            let singles: Vec<Vec<f64>> = (rb..rb + ds).map(|r| ds3_process_block(&raw, r, 1, &p, &ctx).unwrap()).collect();
            for (c, v) in block.iter().enumerate() {
                let mean: f64 = singles.iter().flat_map(|row| &row[c * ds..(c + 1) * ds]).sum::<f64>() / (ds * ds) as f64;
                assert!((v - mean).abs() < 1e-12, "ds={ds} row={rb} col={c}");
            }
        }
    }
}

#[test]
fn same_seed_same_frame() {
    let params = SimParams::calibrated();
    let img = scenes::natural(8);
    let scene = params.scene.apply(&img);
    let bank = FilterBank::new(vec![Filter::from_fn(|i, j| encode_weight((i as i32 - j as i32) % 4).unwrap())]).unwrap();
    let cfg = ConvConfig {
        ds: 2,
        stride: 4,
        n_filt: 1,
        ..ConvConfig::default()
    };
    let run = |seed| {
        run_feature_extraction(&scene, &bank, &cfg, &params, &NoiseContext::new(seed, Profile::Calibrated.flags())).unwrap()
    };
    assert_eq!(run(5), run(5));
    assert_ne!(run(5).maps[0].codes, run(6).maps[0].codes);
}

#[test]
fn every_flag_off_equals_noiseless() {
    let params = SimParams::ideal();
    let img = scenes::natural(2);
    let scene = params.scene.apply(&img);
    let bank = FilterBank::new(vec![Filter::from_fn(|i, _| encode_weight(i as i32 % 3 - 1).unwrap())]).unwrap();
    let cfg = ConvConfig {
        ds: 4,
        stride: 2,
        n_filt: 1,
        ..ConvConfig::default()
    };
    let a = run_feature_extraction(&scene, &bank, &cfg, &params, &NoiseContext::new(77, NoiseFlags::none())).unwrap();
    let b = run_feature_extraction(&scene, &bank, &cfg, &params, &NoiseContext::noiseless()).unwrap();
    assert_eq!(a.maps, b.maps);
}
