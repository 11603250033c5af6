//! Spatial-hash removal of duplicate critical points arising near span
//! junctions.
//!
//! Each point is snapped to the integer lattice of cell size `20 tau`; both
//! floor and ceiling are taken per axis, giving `2^d` candidate indices. Any
//! two points within distance `tau` then share at least one candidate index,
//! so probing those buckets finds every duplicate. Survivors keep first-seen
//! order; the pass is single-threaded by contract because the greedy result
//! depends on input order.

use std::collections::HashMap;

/// Greedy first-wins deduplication. Returns the indices of surviving points
/// in input order; any two survivors are at least `tau` apart.
pub fn dedup_indices(points: &[&[f64]], tau: f64) -> Vec<usize> {
    assert!(tau > 0.0, "duplicate radius must be positive");
    let Some(first) = points.first() else {
        return Vec::new();
    };
    let d = first.len();
    let cell = 20.0 * tau;

    let mut buckets: HashMap<u64, Vec<usize>> = HashMap::new();
    let mut kept: Vec<usize> = Vec::new();
    let mut keys = Vec::with_capacity(1 << d);

    for (i, x) in points.iter().enumerate() {
        debug_assert_eq!(x.len(), d);
        candidate_keys(x, cell, &mut keys);
        let duplicate = keys.iter().any(|key| {
            buckets
                .get(key)
                .is_some_and(|residents| {
                    residents
                        .iter()
                        .any(|&j| distance(points[j], x) < tau)
                })
        });
        if duplicate {
            continue;
        }
        for &key in &keys {
            buckets.entry(key).or_default().push(i);
        }
        kept.push(i);
    }
    kept
}

/// All 2^d floor/ceiling snap combinations, hashed to bucket keys. Identical
/// combinations (integer coordinates) are collapsed.
fn candidate_keys(x: &[f64], cell: f64, keys: &mut Vec<u64>) {
    let d = x.len();
    keys.clear();
    for mask in 0u32..(1 << d) {
        let mut key = 0u64;
        for (l, &v) in x.iter().enumerate() {
            let k = v / cell;
            let snapped = if mask & (1 << l) != 0 {
                k.ceil()
            } else {
                k.floor()
            } as i64;
            key = hash_combine(key, snapped as u64);
        }
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
}

/// Sequential avalanche-quality index mixer in the style of the classic
/// hash_combine recurrence, widened to 64 bits.
pub(crate) fn hash_combine(seed: u64, value: u64) -> u64 {
    let h = splitmix64(value);
    seed ^ (h
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(seed << 6)
        .wrapping_add(seed >> 2))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Duplicate radius for comparing against a grid-sampled reference: just
/// under one grid cell, in parameter units of the smallest axis cell.
pub fn grid_matched_tau(field: &crate::field::GridScalarField) -> f64 {
    0.999
        * field
            .cell_sizes_param()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
}
