//! Command-line driver: resolves a run configuration, simulates, and writes
//! artifacts. Outputs are staged in memory and written at the end, so a
//! failed run leaves nothing behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Parser;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::config::{load_config, parse_config_with, RunConfig, RunMode};
use crate::io::filters::load_filters;
use crate::io::pgm::{encode_pgm, read_pgm, render_minmax};
use crate::noise::NoiseContext;
use crate::params::Profile;
use crate::perf::{
    conv_ops_per_frame, data_reduction, perf_table, rmse, OpCountBasis, PowerProfile, PERF_CSV_HEADER,
};
use crate::pipeline::reference::reference_convolution;
use crate::pipeline::timing::frame_timing;
use crate::pipeline::{run_feature_extraction, run_imaging, FilterBank};
use crate::roi::{detection_metrics, fc_op_count, reference_detection, run_roi};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ProfileArg {
    Ideal,
    Calibrated,
}

impl From<ProfileArg> for Profile {
    fn from(p: ProfileArg) -> Self {
        match p {
            ProfileArg::Ideal => Profile::Ideal,
            ProfileArg::Calibrated => Profile::Calibrated,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ModeArg {
    Imaging,
    Fe,
    Roi,
    Perf,
}

impl From<ModeArg> for RunMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Imaging => RunMode::Imaging,
            ModeArg::Fe => RunMode::Fe,
            ModeArg::Roi => RunMode::Roi,
            ModeArg::Perf => RunMode::Perf,
        }
    }
}

/// Behavioral simulator of a near-sensor convolutional imager.
#[derive(Debug, Clone, Parser)]
#[command(name = "nearsensor", version)]
pub struct Cli {
    /// Run configuration (`key = value` lines).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Filter bank file.
    #[arg(long)]
    pub filters: Option<PathBuf>,
    /// Input scene as binary PGM.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Ground-truth patch mask (PGM) for detection metrics.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub profile: Option<ProfileArg>,
    /// Independent Monte-Carlo runs; trial i uses seed + i.
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

impl Cli {
    /// Config file values, then command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let profile = self.profile.map(Profile::from);
        let mut cfg = match &self.config {
            Some(path) => load_config(path, profile)?,
            None => parse_config_with("", "<defaults>", profile)?,
        };
        if let Some(m) = self.mode {
            cfg.set_mode(m.into());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        for (slot, arg) in [
            (&mut cfg.scene, &self.scene),
            (&mut cfg.filters, &self.filters),
            (&mut cfg.truth, &self.truth),
        ] {
            if arg.is_some() {
                slot.clone_from(arg);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One output file held in memory until the run succeeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn text(name: impl Into<String>, text: String) -> Self {
        Self {
            name: name.into(),
            bytes: text.into_bytes(),
        }
    }
}

fn stamp(hash: &str) -> String {
    format!("# config_hash={hash}\n")
}

fn grid_csv<T: std::fmt::Display>(hash: &str, g: &Grid<T>) -> String {
    let mut s = stamp(hash);
    for r in 0..g.rows() {
        let row: Vec<String> = g.row(r).iter().map(|v| v.to_string()).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn require<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Precondition(format!("this mode needs --{what}")))
}

fn perf_csv(hash: &str) -> Result<String> {
    let mut s = stamp(hash);
    s.push_str(PERF_CSV_HEADER);
    s.push('\n');
    for row in perf_table(&PowerProfile::measured(), OpCountBasis::default())? {
        s.push_str(&row.csv());
        s.push('\n');
    }
    Ok(s)
}

fn timing_csv(hash: &str, cfg: &RunConfig) -> Result<String> {
    let ft = frame_timing(&cfg.conv, &cfg.params.timing)?;
    let mut s = stamp(hash);
    s.push_str("ds,stride,n_filt,fmap_bits,t_exp_ms,t_conv_ms,period_ms,fps,executed,beyond_silicon\n");
    let _ = writeln!(
        s,
        "{},{},{},{},{:.4},{:.4},{:.4},{:.3},{:?},{}",
        cfg.conv.ds,
        cfg.conv.stride,
        cfg.conv.n_filt,
        cfg.conv.fmap_bits,
        cfg.conv.t_exp * 1e3,
        ft.t_conv * 1e3,
        ft.period * 1e3,
        ft.fps,
        ft.executed,
        ft.beyond_silicon
    );
    Ok(s)
}

fn bank_for(cfg: &RunConfig) -> Result<FilterBank> {
    load_filters(require(&cfg.filters, "filters")?)
}

/// Simulates one run and returns its artifacts.
pub fn simulate(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    cfg.validate()?;
    let hash = cfg.hash();
    let mut out = vec![
        Artifact::text("config.echo", format!("{}{}", stamp(&hash), cfg.echo())),
        Artifact::text("metrics.csv", perf_csv(&hash)?),
    ];
    if cfg.mode == RunMode::Perf {
        return Ok(out);
    }
    let image = read_pgm(require(&cfg.scene, "scene")?)?;
    let scene = cfg.params.scene.apply(&image);
    let ctx = NoiseContext::new(cfg.seed, cfg.flags);
    match cfg.mode {
        RunMode::Imaging => {
            let img = run_imaging(&scene, &cfg.conv, &cfg.params, &ctx)?;
            out.push(Artifact {
                name: "image.pgm".into(),
                bytes: encode_pgm(&img, Some(&format!("config_hash={hash}"))),
            });
        }
        RunMode::Fe => {
            let bank = bank_for(cfg)?;
            let maps = run_feature_extraction(&scene, &bank, &cfg.conv, &cfg.params, &ctx)?;
            let refs = reference_convolution(&image, &bank.filters()[..cfg.conv.n_filt], cfg.conv.ds, cfg.conv.stride)?;
            let mut table = stamp(&hash);
            table.push_str("filter,rmse_pct,mean_code,std_code\n");
            for (k, (m, r)) in maps.maps.iter().zip(&refs).enumerate() {
                out.push(Artifact::text(format!("fmap_{k:02}.csv"), grid_csv(&hash, &m.codes)));
                out.push(Artifact {
                    name: format!("fmap_{k:02}.pgm"),
                    bytes: encode_pgm(&render_minmax(&m.as_f64()), Some(&format!("config_hash={hash}"))),
                });
                let e = match rmse(r, &m.as_f64()) {
                    Ok(v) => format!("{v:.4}"),
                    Err(Error::UndefinedNormalization) => "undefined".into(),
                    Err(e) => return Err(e),
                };
                let _ = writeln!(table, "{k},{e},{:.4},{:.4}", m.mean, m.std);
            }
            out.push(Artifact::text("rmse.csv", table));
            out.push(Artifact::text("timing.csv", timing_csv(&hash, cfg)?));
        }
        RunMode::Roi => {
            let bank = bank_for(cfg)?;
            let (maps, det) = run_roi(&scene, &bank, &cfg.conv, &cfg.params, &ctx)?;
            let reference = reference_detection(&image, &bank, &cfg.conv, &cfg.params)?;
            let n_f = cfg.conv.fmap_size()?;
            out.push(Artifact::text("heatmap.csv", grid_csv(&hash, &det.heatmap)));
            out.push(Artifact {
                name: "detection.pgm".into(),
                bytes: encode_pgm(&det.detection.map(|&d| d * 255), Some(&format!("config_hash={hash}"))),
            });
            let predicted = det.detection.as_slice().iter().filter(|&&d| d != 0).count();
            let discard = 1.0 - predicted as f64 / (n_f * n_f) as f64;
            let mut m = String::new();
            let _ = writeln!(m, "{{");
            let _ = writeln!(m, "  \"config_hash\": \"{hash}\",");
            let _ = writeln!(m, "  \"patches\": {},", n_f * n_f);
            let _ = writeln!(m, "  \"predicted_positive\": {predicted},");
            let _ = writeln!(m, "  \"discard\": {discard:.6},");
            if let Some(t) = &cfg.truth {
                let truth = read_pgm(t)?.map(|&v| u8::from(v != 0));
                let dm = detection_metrics(&det.detection, &truth)?;
                let _ = writeln!(m, "  \"fnr\": {:.6},", dm.fnr);
                let _ = writeln!(m, "  \"tnr\": {:.6},", dm.tnr);
            }
            let _ = writeln!(m, "  \"fc_ops\": {},", fc_op_count(n_f, cfg.conv.n_filt));
            let _ = writeln!(m, "  \"conv_ops\": {:.0},", conv_ops_per_frame(cfg.conv.ds, cfg.conv.stride, cfg.conv.n_filt)?);
            let _ = writeln!(
                m,
                "  \"data_reduction\": {:.6},",
                data_reduction(cfg.conv.ds, cfg.conv.stride, cfg.conv.n_filt, cfg.conv.fmap_bits)?
            );
            let _ = writeln!(m, "  \"saturated_psums\": {},", maps.saturated_psums);
            let _ = writeln!(m, "  \"matches_reference\": {}", det.detection == reference.detection);
            m.push_str("}\n");
            out.push(Artifact::text("metrics.txt", m));
            out.push(Artifact::text("timing.csv", timing_csv(&hash, cfg)?));
        }
        RunMode::Perf => unreachable!("handled above"),
    }
    Ok(out)
}

/// Writes artifacts, removing everything written so far if one fails.
pub fn write_all(dir: &Path, groups: &[(PathBuf, Vec<Artifact>)]) -> Result<Vec<PathBuf>> {
    let mut written: Vec<PathBuf> = Vec::new();
    let mut made_dirs: Vec<PathBuf> = Vec::new();
    let result = (|| {
        for (sub, arts) in groups {
            let d = dir.join(sub);
            if !d.exists() {
                std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
                made_dirs.push(d.clone());
            }
            for a in arts {
                let path = d.join(&a.name);
                std::fs::write(&path, &a.bytes).map_err(|e| Error::io(&path, e))?;
                written.push(path);
            }
        }
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            for d in made_dirs.iter().rev() {
                let _ = std::fs::remove_dir(d);
            }
            Err(e)
        }
    }
}

/// Full command: resolve, simulate every trial, write outputs.
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if cli.trials == 0 {
        return Err(Error::Precondition("--trials must be at least 1".into()));
    }
    let base = cli.resolve()?;
    let groups: Vec<(PathBuf, Vec<Artifact>)> = if cli.trials == 1 {
        vec![(PathBuf::new(), simulate(&base)?)]
    } else {
        (0..cli.trials)
            .into_par_iter()
            .map(|i| {
                let mut cfg = base.clone();
                cfg.seed = base.seed.wrapping_add(i as u64);
                Ok((PathBuf::from(format!("trial_{i:03}")), simulate(&cfg)?))
            })
            .collect::<Result<_>>()?
    };
    write_all(&cli.out, &groups)
}
