//! Mask post-processing and segmentation metrics.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::raster::{check_dims, BinaryMask};

pub const DEFAULT_SMOOTH_RADIUS: usize = 2;

/// Jaccard scores at or below this are reported as zero by the thresholded
/// variant.
pub const JACCARD_THRESHOLD: f64 = 0.65;

/// Offsets of a digital disk: all `(dx, dy)` with `dx² + dy² <= r²`.
fn disk(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut offsets = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                offsets.push((dx, dy));
            }
        }
    }
    offsets
}

// Neighbours outside the canvas are ignored: dilation takes the max and
// erosion the min over in-bounds neighbours only. The pair stays adjoint,
// so opening and closing remain idempotent.
fn morph(mask: &BinaryMask, kernel: &[(i64, i64)], dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let mut hit = !dilate;
            for &(dx, dy) in kernel {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w || ny >= h {
                    continue;
                }
                let v = mask.get(nx as usize, ny as usize);
                if dilate && v {
                    hit = true;
                    break;
                }
                if !dilate && !v {
                    hit = false;
                    break;
                }
            }
            out.push(hit);
        }
    }
    BinaryMask::from_parts_unchecked(mask.width(), mask.height(), out)
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, &disk(radius), false)
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    morph(mask, &disk(radius), true)
}

pub fn open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    dilate(&erode(mask, radius), radius)
}

pub fn close(mask: &BinaryMask, radius: usize) -> BinaryMask {
    erode(&dilate(mask, radius), radius)
}

/// 8-connected component labels (0 = background, components numbered from 1
/// in raster order of their first pixel) and per-label pixel counts.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, Vec<usize>) {
    let (w, h) = (mask.width(), mask.height());
    let mut parent: Vec<u32> = vec![0];
    let mut labels = vec![0u32; w * h];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            parent[x as usize] = parent[parent[x as usize] as usize];
            x = parent[x as usize];
        }
        x
    }

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            // previously visited 8-neighbours: W, NW, N, NE
            let mut neighbours = [0u32; 4];
            if x > 0 {
                neighbours[0] = labels[y * w + x - 1];
            }
            if y > 0 {
                if x > 0 {
                    neighbours[1] = labels[(y - 1) * w + x - 1];
                }
                neighbours[2] = labels[(y - 1) * w + x];
                if x + 1 < w {
                    neighbours[3] = labels[(y - 1) * w + x + 1];
                }
            }
            let mut current = 0u32;
            for &n in neighbours.iter().filter(|n| **n != 0) {
                let root = find(&mut parent, n);
                if current == 0 {
                    current = root;
                } else if root != current {
                    let (lo, hi) = (current.min(root), current.max(root));
                    parent[hi as usize] = lo;
                    current = lo;
                }
            }
            if current == 0 {
                current = parent.len() as u32;
                parent.push(current);
            }
            labels[y * w + x] = current;
        }
    }

    // Roots are always the smallest provisional label of their set, and
    // provisional labels are issued in raster order, so renumbering roots in
    // increasing order gives raster order of first pixel.
    let mut remap = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in 1..parent.len() as u32 {
        let root = find(&mut parent, l);
        if root == l {
            next += 1;
            remap[l as usize] = next;
        }
    }
    let mut sizes = vec![0usize; next as usize + 1];
    for l in labels.iter_mut().filter(|l| **l != 0) {
        let root = find(&mut parent, *l);
        *l = remap[root as usize];
        sizes[*l as usize] += 1;
    }
    (labels, sizes)
}

/// Keep only the largest 8-connected component. Equal sizes go to the
/// component whose first pixel comes earliest in raster order.
pub fn largest_component(mask: &BinaryMask) -> BinaryMask {
    let (labels, sizes) = label_components(mask);
    let best = sizes
        .iter()
        .enumerate()
        .skip(1)
        .fold(None::<(usize, usize)>, |best, (label, &size)| match best {
            Some((_, s)) if s >= size => best,
            _ => Some((label, size)),
        });
    let data = match best {
        Some((label, _)) => labels.iter().map(|l| *l as usize == label).collect(),
        None => vec![false; labels.len()],
    };
    BinaryMask::from_parts_unchecked(mask.width(), mask.height(), data)
}

/// Open, close, then keep the largest component; repeated until the mask
/// stops changing so the result is a fixed point.
pub fn postprocess(mask: &BinaryMask, smooth_radius: usize) -> BinaryMask {
    // Bounded in practice by a handful of rounds; the cap only guards
    // against a pathological oscillation.
    const MAX_ROUNDS: usize = 64;
    let step = |m: &BinaryMask| largest_component(&close(&open(m, smooth_radius), smooth_radius));
    let mut cur = step(mask);
    for _ in 0..MAX_ROUNDS {
        let next = step(&cur);
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn from_masks(pred: &BinaryMask, truth: &BinaryMask) -> Result<Self> {
        pred.same_size(truth)?;
        let mut c = ConfusionCounts::default();
        for (p, t) in pred.data().iter().zip(truth.data()) {
            match (*p, *t) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegMetrics {
    pub jaccard: f64,
    pub thresholded_jaccard: f64,
    pub dice: f64,
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

fn ratio_or_one(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Jaccard if strictly above 0.65, else 0.
pub fn threshold_jaccard(jaccard: f64) -> f64 {
    if jaccard > JACCARD_THRESHOLD {
        jaccard
    } else {
        0.0
    }
}

impl SegMetrics {
    /// Empty denominators score 1: both masks empty gives perfect overlap,
    /// empty truth gives sensitivity 1, all-true truth gives specificity 1.
    pub fn from_counts(c: &ConfusionCounts) -> Self {
        let total = c.tp + c.fp + c.fn_ + c.tn;
        let jaccard = ratio_or_one(c.tp, c.tp + c.fp + c.fn_);
        Self {
            jaccard,
            thresholded_jaccard: threshold_jaccard(jaccard),
            dice: ratio_or_one(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            accuracy: ratio_or_one(c.tp + c.tn, total),
            sensitivity: ratio_or_one(c.tp, c.tp + c.fn_),
            specificity: ratio_or_one(c.tn, c.tn + c.fp),
        }
    }

    /// Componentwise mean; `None` for an empty slice.
    pub fn mean(items: &[SegMetrics]) -> Option<SegMetrics> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let avg = |f: fn(&SegMetrics) -> f64| items.iter().map(f).sum::<f64>() / n;
        Some(SegMetrics {
            jaccard: avg(|m| m.jaccard),
            thresholded_jaccard: avg(|m| m.thresholded_jaccard),
            dice: avg(|m| m.dice),
            accuracy: avg(|m| m.accuracy),
            sensitivity: avg(|m| m.sensitivity),
            specificity: avg(|m| m.specificity),
        })
    }
}

pub fn compute_metrics(pred: &BinaryMask, truth: &BinaryMask) -> Result<SegMetrics> {
    check_dims(
        (pred.width(), pred.height()),
        (truth.width(), truth.height()),
    )?;
    Ok(SegMetrics::from_counts(&ConfusionCounts::from_masks(pred, truth)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use proptest::prelude::*;

    fn rect(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> BinaryMask {
        BinaryMask::from_fn(w, h, |x, y| x >= x0 && x < x1 && y >= y0 && y < y1).unwrap()
    }

    #[test]
    fn disk_offsets() {
        assert_eq!(disk(0), vec![(0, 0)]);
        assert_eq!(disk(1).len(), 5);
        assert_eq!(disk(2).len(), 13);
    }

    #[test]
    fn blob_survives_speck_does_not() {
        let mut m = rect(20, 20, 2, 2, 12, 12);
        m.set(17, 17, true);
        m.set(18, 17, true);
        let blob = rect(20, 20, 2, 2, 12, 12);
        let out = postprocess(&m, 2);
        assert!(!out.get(17, 17) && !out.get(18, 17));
        // opening rounds the corners; the rest of the blob survives
        assert_eq!(out, close(&open(&blob, 2), 2));
        // radius 0 leaves smoothing out; the speck is still dropped by size
        assert_eq!(postprocess(&m, 0), rect(20, 20, 2, 2, 12, 12));
    }

    #[test]
    fn empty_and_solid_rectangle() {
        let empty = BinaryMask::empty(9, 7).unwrap();
        assert_eq!(postprocess(&empty, 2), empty);
        let r = rect(9, 7, 1, 2, 6, 5);
        assert_eq!(postprocess(&r, 0), r);
        let full = BinaryMask::from_fn(9, 7, |_, _| true).unwrap();
        assert_eq!(postprocess(&full, 2), full);
    }

    #[test]
    fn components_are_eight_connected_and_ordered() {
        // diagonal touch joins; tie in size resolved by first raster pixel
        let m = BinaryMask::from_fn(6, 4, |x, y| matches!((x, y), (0, 0) | (1, 1) | (4, 2) | (5, 3))).unwrap();
        let (labels, sizes) = label_components(&m);
        assert_eq!(sizes, vec![0, 2, 2]);
        assert_eq!(labels[0], 1);
        assert_eq!(labels[2 * 6 + 4], 2);
        let lc = largest_component(&m);
        assert!(lc.get(0, 0) && lc.get(1, 1) && !lc.get(4, 2));
    }

    #[test]
    fn u_shape_merges_into_one_component() {
        let m = BinaryMask::from_fn(5, 4, |x, y| x == 0 || x == 4 || y == 3).unwrap();
        let (_, sizes) = label_components(&m);
        assert_eq!(sizes.len(), 2);
        assert_eq!(sizes[1], m.area());
    }

    #[test]
    fn metrics_perfect_and_disjoint() {
        let t = rect(8, 8, 1, 1, 5, 5);
        let m = compute_metrics(&t, &t).unwrap();
        assert_eq!(
            m,
            SegMetrics {
                jaccard: 1.0,
                thresholded_jaccard: 1.0,
                dice: 1.0,
                accuracy: 1.0,
                sensitivity: 1.0,
                specificity: 1.0
            }
        );
        let p = rect(8, 8, 5, 5, 8, 8);
        let m = compute_metrics(&p, &t).unwrap();
        assert_eq!((m.jaccard, m.dice, m.sensitivity, m.thresholded_jaccard), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn metrics_four_by_four_example() {
        let truth = rect(4, 4, 0, 0, 2, 4);
        let pred = rect(4, 4, 0, 0, 4, 2);
        let c = ConfusionCounts::from_masks(&pred, &truth).unwrap();
        assert_eq!(c, ConfusionCounts { tp: 4, fp: 4, fn_: 4, tn: 4 });
        let m = compute_metrics(&pred, &truth).unwrap();
        assert_eq!(m.jaccard, 1.0 / 3.0);
        assert_eq!(m.dice, 0.5);
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.sensitivity, 0.5);
        assert_eq!(m.specificity, 0.5);
        assert_eq!(m.thresholded_jaccard, 0.0);
    }

    #[test]
    fn empty_denominator_conventions() {
        let empty = BinaryMask::empty(3, 3).unwrap();
        let m = compute_metrics(&empty, &empty).unwrap();
        assert_eq!((m.jaccard, m.dice, m.sensitivity, m.specificity), (1.0, 1.0, 1.0, 1.0));
        let full = empty.complement();
        let m = compute_metrics(&full, &full).unwrap();
        assert_eq!(m.specificity, 1.0);
    }

    #[test]
    fn threshold_is_exclusive() {
        assert_eq!(threshold_jaccard(0.65), 0.0);
        assert_eq!(threshold_jaccard(0.64), 0.0);
        assert_eq!(threshold_jaccard(0.66), 0.66);
    }

    #[test]
    fn metrics_dimension_mismatch() {
        let a = BinaryMask::empty(3, 3).unwrap();
        let b = BinaryMask::empty(3, 4).unwrap();
        assert!(matches!(compute_metrics(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (prop::collection::vec(any::<bool>(), 64), prop::collection::vec(any::<bool>(), 64)).prop_map(|(a, b)| {
            (BinaryMask::new(8, 8, a).unwrap(), BinaryMask::new(8, 8, b).unwrap())
        })
    }

    proptest! {
        #[test]
        fn metric_symmetries((p, t) in arb_pair()) {
            let pt = compute_metrics(&p, &t).unwrap();
            let tp = compute_metrics(&t, &p).unwrap();
            prop_assert_eq!(pt.jaccard, tp.jaccard);
            prop_assert_eq!(pt.dice, tp.dice);
            let comp = compute_metrics(&p.complement(), &t.complement()).unwrap();
            prop_assert_eq!(pt.sensitivity, comp.specificity);
            prop_assert!((pt.dice - 2.0 * pt.jaccard / (1.0 + pt.jaccard)).abs() <= 1e-12);
            prop_assert!(pt.thresholded_jaccard == 0.0 || pt.thresholded_jaccard > 0.65);
        }

        #[test]
        fn opening_and_closing_are_idempotent(d in prop::collection::vec(any::<bool>(), 144), r in 0usize..3) {
            let m = BinaryMask::new(12, 12, d).unwrap();
            let o = open(&m, r);
            prop_assert_eq!(open(&o, r), o.clone());
            let c = close(&m, r);
            prop_assert_eq!(close(&c, r), c);
        }
    }
}
