//! Quantitative comparison of two critical-point sets: one-to-one alignment
//! matching in grid-cell units, Jaccard index, and type agreement.

use crate::extract::MorseType;

/// One point of a set being compared: a physical position and its type.
#[derive(Debug, Clone)]
pub struct PointRecord {
    pub position: Vec<f64>,
    pub morse_type: MorseType,
}

/// Result of aligning two critical-point sets.
#[derive(Debug, Clone)]
pub struct AlignmentReport {
    pub size_a: usize,
    pub size_b: usize,
    /// Index pairs `(a, b)` of matched points.
    pub pairs: Vec<(usize, usize)>,
    pub aligned: usize,
    pub aligned_same_type: usize,
    /// `aligned / (|A| + |B| - aligned)`.
    pub jaccard: f64,
    /// Threshold used, in grid-cell units.
    pub threshold: f64,
}

/// Greedy mutual-nearest one-to-one matching: repeatedly match the globally
/// closest unmatched pair with scaled distance below `threshold_cells`.
/// Distances are measured per axis in units of `cell`, so anisotropic grids
/// weigh each axis by its own cell size.
pub fn align(
    a: &[PointRecord],
    b: &[PointRecord],
    cell: &[f64],
    threshold_cells: f64,
) -> AlignmentReport {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();

    // spatial buckets over B at the threshold scale keep pair generation
    // close to linear for large, well-separated sets
    let mut buckets: std::collections::HashMap<Vec<i64>, Vec<usize>> =
        std::collections::HashMap::new();
    let key = |p: &[f64]| -> Vec<i64> {
        p.iter()
            .zip(cell)
            .map(|(&x, &c)| (x / (c * threshold_cells)).floor() as i64)
            .collect()
    };
    for (j, q) in b.iter().enumerate() {
        buckets.entry(key(&q.position)).or_default().push(j);
    }
    let dim = cell.len();
    let mut neighbor = vec![0i64; dim];
    for (i, p) in a.iter().enumerate() {
        let base = key(&p.position);
        // walk the 3^d neighborhood of the bucket
        let mut offsets = vec![-1i64; dim];
        'cells: loop {
            for l in 0..dim {
                neighbor[l] = base[l] + offsets[l];
            }
            if let Some(js) = buckets.get(&neighbor) {
                for &j in js {
                    let dist = scaled_distance(&p.position, &b[j].position, cell);
                    if dist < threshold_cells {
                        candidates.push((dist, i, j));
                    }
                }
            }
            let mut l = dim;
            loop {
                if l == 0 {
                    break 'cells;
                }
                l -= 1;
                offsets[l] += 1;
                if offsets[l] <= 1 {
                    break;
                }
                offsets[l] = -1;
            }
        }
    }

    candidates.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut matched_a = vec![false; a.len()];
    let mut matched_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    let mut aligned_same_type = 0;
    for (_, i, j) in candidates {
        if matched_a[i] || matched_b[j] {
            continue;
        }
        matched_a[i] = true;
        matched_b[j] = true;
        if a[i].morse_type == b[j].morse_type {
            aligned_same_type += 1;
        }
        pairs.push((i, j));
    }
    let aligned = pairs.len();
    let union = a.len() + b.len() - aligned;
    AlignmentReport {
        size_a: a.len(),
        size_b: b.len(),
        pairs,
        aligned,
        aligned_same_type,
        jaccard: if union == 0 {
            1.0
        } else {
            aligned as f64 / union as f64
        },
        threshold: threshold_cells,
    }
}

fn scaled_distance(a: &[f64], b: &[f64], cell: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(cell)
        .map(|((&x, &y), &c)| {
            let d = (x - y) / c;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
