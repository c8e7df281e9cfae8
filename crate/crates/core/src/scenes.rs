//! Deterministic synthetic test scenes.
//!
//! Natural scenes mix a multi-octave value-noise texture, soft blobs, a
//! grating and a few hard-edged shapes, which gives spatially varying
//! feature maps at every downsampling level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::Grid;
use crate::ARRAY_SIZE;

const N: usize = ARRAY_SIZE;

fn value_noise(rng: &mut ChaCha8Rng, cells: usize) -> Grid<f64> {
    let lattice = Grid::from_fn(cells + 1, cells + 1, |_, _| rng.random::<f64>() - 0.5);
    let scale = cells as f64 / N as f64;
    Grid::from_fn(N, N, |r, c| {
        let (y, x) = (r as f64 * scale, c as f64 * scale);
        let (y0, x0) = (y.floor() as usize, x.floor() as usize);
        let (fy, fx) = (y - y0 as f64, x - x0 as f64);
        let (sy, sx) = (fy * fy * (3.0 - 2.0 * fy), fx * fx * (3.0 - 2.0 * fx));
        let top = lattice.get(y0, x0) * (1.0 - sx) + lattice.get(y0, x0 + 1) * sx;
        let bot = lattice.get(y0 + 1, x0) * (1.0 - sx) + lattice.get(y0 + 1, x0 + 1) * sx;
        top * (1.0 - sy) + bot * sy
    })
}

fn normalize(field: &Grid<f64>, lo: f64, hi: f64) -> Grid<u8> {
    let (mn, mx) = field
        .as_slice()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = (mx - mn).max(1e-12);
    field.map(|&v| (lo + (v - mn) / span * (hi - lo)).round().clamp(0.0, 255.0) as u8)
}

fn natural_field(rng: &mut ChaCha8Rng) -> Grid<f64> {
    let mut acc = Grid::filled(N, N, 0.0);
    for (cells, amp) in [(2, 1.0), (4, 0.6), (8, 0.35), (16, 0.2), (32, 0.1)] {
        let layer = value_noise(rng, cells);
        for (a, l) in acc.as_mut_slice().iter_mut().zip(layer.as_slice()) {
            *a += amp * l;
        }
    }
    let blobs = rng.random_range(4..10);
    for _ in 0..blobs {
        let (cy, cx) = (rng.random_range(0.0..N as f64), rng.random_range(0.0..N as f64));
        let s = rng.random_range(4.0..24.0);
        let a = rng.random_range(-0.6..0.6);
        add(&mut acc, |r, c| {
            let d2 = (r - cy).powi(2) + (c - cx).powi(2);
            a * (-d2 / (2.0 * s * s)).exp()
        });
    }
    let theta = rng.random_range(0.0..std::f64::consts::PI);
    let period = rng.random_range(6.0..30.0);
    let ga = rng.random_range(0.05..0.25);
    add(&mut acc, |r, c| {
        ga * ((c * theta.cos() + r * theta.sin()) * std::f64::consts::TAU / period).sin()
    });
    let shapes = rng.random_range(1..4);
    for _ in 0..shapes {
        let (r0, c0) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
        let (h, w) = (rng.random_range(10.0..50.0), rng.random_range(10.0..50.0));
        let a = rng.random_range(-0.5..0.5);
        add(&mut acc, |r, c| {
            if r >= r0 && r < r0 + h && c >= c0 && c < c0 + w {
                a
            } else {
                0.0
            }
        });
    }
    acc
}

fn add(acc: &mut Grid<f64>, f: impl Fn(f64, f64) -> f64) {
    for r in 0..N {
        for c in 0..N {
            *acc.get_mut(r, c) += f(r as f64, c as f64);
        }
    }
}

/// A 128x128 natural-looking 8b image.
pub fn natural(seed: u64) -> Grid<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normalize(&natural_field(&mut rng), 12.0, 243.0)
}

/// Dead-leaves image: occluding discs with power-law radii and uniform gray
/// levels, which reproduces the edge density and 1/f spectrum of photographs.
pub fn dead_leaves(seed: u64) -> Grid<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (r_min, r_max) = (1.5f64, 48.0f64);
    let (a, b) = (r_min.powi(-2), r_max.powi(-2));
    let mut img = Grid::filled(N, N, 0u8);
    let mut open = Grid::filled(N, N, true);
    let mut remaining = N * N;
    // Front to back: each disc only paints pixels no earlier disc covered.
    while remaining > 0 {
        let r = (a - rng.random::<f64>() * (a - b)).powf(-0.5);
        let cy = rng.random_range(-r..N as f64 + r);
        let cx = rng.random_range(-r..N as f64 + r);
        let level: u8 = rng.random();
        let (y0, y1) = ((cy - r).floor().max(0.0) as usize, ((cy + r).ceil().max(0.0) as usize).min(N));
        let (x0, x1) = ((cx - r).floor().max(0.0) as usize, ((cx + r).ceil().max(0.0) as usize).min(N));
        for y in y0..y1 {
            for x in x0..x1 {
                let d2 = (y as f64 + 0.5 - cy).powi(2) + (x as f64 + 0.5 - cx).powi(2);
                if d2 <= r * r && *open.get(y, x) {
                    open.set(y, x, false);
                    img.set(y, x, level);
                    remaining -= 1;
                }
            }
        }
    }
    img
}

/// Face placement in full-resolution pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceBox {
    pub cy: f64,
    pub cx: f64,
    pub ry: f64,
    pub rx: f64,
}

impl FaceBox {
    pub fn contains(&self, r: f64, c: f64) -> bool {
        ((r - self.cy) / self.ry).powi(2) + ((c - self.cx) / self.rx).powi(2) <= 1.0
    }
}

/// A dim textured background with one bright oval face (eyes and mouth dark).
pub fn face(seed: u64) -> (Grid<u8>, FaceBox) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bg = normalize(&natural_field(&mut rng), 10.0, 110.0);
    let face = FaceBox {
        cy: rng.random_range(48.0..80.0),
        cx: rng.random_range(48.0..80.0),
        ry: 26.0,
        rx: 20.0,
    };
    let shade = value_noise(&mut rng, 8);
    let dark = |r: f64, c: f64| {
        let (dy, dx) = ((r - face.cy) / face.ry, (c - face.cx) / face.rx);
        let eye = |ex: f64| ((dy + 0.25) / 0.12).powi(2) + ((dx - ex) / 0.18).powi(2) <= 1.0;
        let mouth = ((dy - 0.45) / 0.08).powi(2) + (dx / 0.4).powi(2) <= 1.0;
        eye(-0.4) || eye(0.4) || mouth
    };
    let img = Grid::from_fn(N, N, |r, c| {
        let (y, x) = (r as f64, c as f64);
        if !face.contains(y, x) {
            return *bg.get(r, c);
        }
        let v = if dark(y, x) { 70.0 } else { 215.0 + 40.0 * shade.get(r, c) };
        v.round().clamp(0.0, 255.0) as u8
    });
    (img, face)
}

/// Ground truth over the patch grid: a patch is positive when its center
/// lies inside the face.
pub fn face_truth(face: &FaceBox, n_f: usize, ds: usize, stride: usize) -> Grid<u8> {
    let half = (crate::pipeline::FILTER_SIZE * ds) as f64 / 2.0;
    Grid::from_fn(n_f, n_f, |r, c| {
        let y = (r * stride * ds) as f64 + half - 0.5;
        let x = (c * stride * ds) as f64 + half - 0.5;
        u8::from(face.contains(y, x))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_varied() {
        assert_eq!(natural(3), natural(3));
        assert_ne!(natural(3), natural(4));
        let img = natural(5);
        let min = *img.as_slice().iter().min().unwrap();
        let max = *img.as_slice().iter().max().unwrap();
        assert_eq!((min, max), (12, 243));
    }

    #[test]
    fn face_truth_has_positives() {
        let (_, fb) = face(1);
        let t = face_truth(&fb, 25, 2, 2);
        let pos = t.as_slice().iter().filter(|&&v| v == 1).count();
        assert!(pos > 20 && pos < 200, "{pos}");
    }
}
