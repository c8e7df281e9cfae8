//! Feature-map RMSE against software convolution of the chip's own
//! imaging-mode capture, for every supported (ds, stride).
//!
//! `cargo run --release --example rmse_sweep -- [images] [filters] [ideal|calibrated]`

use nearsensor::noise::NoiseContext;
use nearsensor::params::{Profile, SimParams};
use nearsensor::perf::{rmse, TABLE_CONFIGS};
use nearsensor::pipeline::reference::reference_convolution;
use nearsensor::pipeline::{run_feature_extraction, run_imaging, ConvConfig, Filter, FilterBank};
use nearsensor::scenes;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> nearsensor::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_img = args.first().and_then(|a| a.parse().ok()).unwrap_or(10usize);
    let n_filt = args.get(1).and_then(|a| a.parse().ok()).unwrap_or(10usize);
    let profile: Profile = args.get(2).map_or("calibrated", String::as_str).parse()?;
    let params = SimParams::for_profile(profile);

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let filters: Vec<Filter> = (0..n_filt)
        .map(|_| {
            let v: Vec<i32> = (0..256).map(|_| rng.random_range(-7..=7)).collect();
            Filter::from_values(&v, Default::default())
        })
        .collect::<nearsensor::Result<_>>()?;
    let bank = FilterBank::new(filters.clone())?;

    println!("ds,stride,rmse_pct,saturated_psums,mean_code_std");
    for (ds, stride) in TABLE_CONFIGS {
        let cfg = ConvConfig {
            ds,
            stride,
            n_filt,
            ..ConvConfig::default()
        };
        let (mut total, mut sat, mut spread) = (0.0, 0, 0.0);
        for i in 0..n_img {
            let scene = params.scene.apply(&scenes::dead_leaves(100 + i as u64));
            let ctx = NoiseContext::new(1 + i as u64, profile.flags());
            let captured = run_imaging(&scene, &cfg, &params, &ctx)?;
            let refs = reference_convolution(&captured, &filters, ds, stride)?;
            let out = run_feature_extraction(&scene, &bank, &cfg, &params, &ctx.with_frame(1))?;
            sat += out.saturated_psums;
            for (r, m) in refs.iter().zip(&out.maps) {
                total += rmse(r, &m.as_f64()).unwrap_or(f64::NAN);
                spread += m.std;
            }
        }
        let n = (n_img * n_filt) as f64;
        println!("{ds},{stride},{:.2},{sat},{:.2}", total / n, spread / n);
    }
    Ok(())
}
