//! Synthetic corpora and independent oracles shared by the integration and
//! acceptance tests. Nothing here calls into the color, engine or mask
//! modules; results are computed from raw 8-bit pixels.

#![allow(dead_code)]

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A corpus written to disk with a manifest file.
pub struct Corpus {
    pub root: PathBuf,
    pub manifest_path: PathBuf,
    pub ids: Vec<String>,
}

/// Write `n` textured images cast by varied illuminants. Every fifth image
/// carries a strongly saturated cast. Masks are written for every image.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) -> Corpus {
    let root = dir.join("images");
    fs::create_dir_all(&root).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (24u32, 20u32);
    let mut entries = Vec::new();
    let mut ids = Vec::new();
    for i in 0..n {
        let id = format!("img{i:03}");
        let cast: [f64; 3] = if i % 5 == 4 {
            // strongly saturated outliers, either red-orange or blue-ish
            if rng.random_bool(0.5) {
                [rng.random_range(1.7..1.9), rng.random_range(0.75..0.9), rng.random_range(0.3..0.45)]
            } else {
                [rng.random_range(0.35..0.5), rng.random_range(0.8..1.0), rng.random_range(1.6..1.8)]
            }
        } else {
            [
                rng.random_range(0.9..1.5),
                rng.random_range(0.8..1.1),
                rng.random_range(0.55..1.1),
            ]
        };
        let level = rng.random_range(90.0..140.0);
        let img = RgbImage::from_fn(w, h, |x, y| {
            let lesion = ((x as f64 - 12.0).powi(2) + (y as f64 - 10.0).powi(2)) < 30.0;
            let shade = if lesion { 0.55 } else { 1.0 };
            let t = 1.0 + 0.15 * ((x * 7 + y * 13) % 11) as f64 / 11.0;
            let px = |c: usize| {
                let jitter = 1.0 + 0.1 * (((x * 31 + y * 17 + c as u32 * 5) % 7) as f64 / 7.0 - 0.5);
                (level * shade * t * cast[c] * jitter).round().clamp(0.0, 255.0) as u8
            };
            image::Rgb([px(0), px(1), px(2)])
        });
        let mask = image::GrayImage::from_fn(w, h, |x, y| {
            let lesion = ((x as f64 - 12.0).powi(2) + (y as f64 - 10.0).powi(2)) < 30.0;
            image::Luma([if lesion { 255 } else { 0 }])
        });
        img.save(root.join(format!("{id}.png"))).unwrap();
        mask.save(root.join(format!("{id}_mask.png"))).unwrap();
        entries.push(serde_json::json!({
            "image_id": id,
            "image_path": format!("{id}.png"),
            "mask_path": format!("{id}_mask.png"),
        }));
        ids.push(id);
    }
    let manifest_path = dir.join("dataset.json");
    let manifest = serde_json::json!({"dataset_root": "images", "entries": entries});
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).unwrap()).unwrap();
    Corpus {
        root,
        manifest_path,
        ids,
    }
}

pub fn read_rgb(path: &Path) -> RgbImage {
    image::open(path).unwrap().to_rgb8()
}

/// Gray World scales from integer channel sums.
pub fn oracle_illuminant(img: &RgbImage) -> Option<[f64; 3]> {
    let mut sums = [0u64; 3];
    for p in img.pixels() {
        for c in 0..3 {
            sums[c] += p[c] as u64;
        }
    }
    let total = sums[0] + sums[1] + sums[2];
    if total == 0 || sums.contains(&0) {
        return None;
    }
    // mean_c / (total_mean / 3) = 3 * sum_c / total
    Some(sums.map(|s| 3.0 * s as f64 / total as f64))
}

pub fn oracle_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn oracle_pixel_saturation(r: f64, g: f64, b: f64) -> f64 {
    let hi = if r > g { r } else { g };
    let hi = if hi > b { hi } else { b };
    let lo = if r < g { r } else { g };
    let lo = if lo < b { lo } else { b };
    if hi == 0.0 {
        0.0
    } else {
        255.0 * (hi - lo) / hi
    }
}

pub fn oracle_saturation_u8(img: &RgbImage) -> f64 {
    let mut total = 0.0;
    for p in img.pixels() {
        total += oracle_pixel_saturation(p[0] as f64, p[1] as f64, p[2] as f64);
    }
    total / (img.width() * img.height()) as f64
}

/// Linear scan over `[lo, hi)` bins with a closed last bin.
pub fn oracle_histogram(values: &[f64], bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    for &v in values {
        #[allow(clippy::needless_range_loop)]
        for i in 0..bins {
            let lo = i as f64 * 255.0 / bins as f64;
            let hi = (i + 1) as f64 * 255.0 / bins as f64;
            let last = i == bins - 1;
            if v >= lo && (v < hi || (last && v <= hi)) {
                counts[i] += 1;
                break;
            }
        }
    }
    counts
}

/// Largest 8-connected component by breadth-first flood fill; ties go to
/// the component discovered first in raster order.
pub fn oracle_largest_component(w: usize, h: usize, data: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; w * h];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..w * h {
        if !data[start] || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if data[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    let mut out = vec![false; w * h];
    for i in best {
        out[i] = true;
    }
    out
}

/// TP, FP, FN, TN by direct pixel loop.
pub fn oracle_counts(w: usize, h: usize, pred: &[bool], truth: &[bool]) -> [u64; 4] {
    let mut c = [0u64; 4];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let k = match (pred[i], truth[i]) {
                (true, true) => 0,
                (true, false) => 1,
                (false, true) => 2,
                (false, false) => 3,
            };
            c[k] += 1;
        }
    }
    c
}

/// Every regular file under `dir`, relative path and bytes, sorted.
pub fn snapshot_dir(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
        }
    }
    out.sort();
    out
}
