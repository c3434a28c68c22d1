//! Interval estimates and trial seeding.

use sha2::{Digest, Sha256};

/// 95% Wilson score interval for `hits` out of `n`; `None` when `n = 0`.
pub fn wilson(hits: usize, n: usize) -> Option<(f64, f64)> {
    if n == 0 {
        return None;
    }
    let z = 1.959_963_984_540_054;
    let (nf, p) = (n as f64, hits as f64 / n as f64);
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    // The bounds touch 0 and 1 exactly at the extremes; rounding would leave them a hair off.
    let lo = if hits == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if hits == n { 1.0 } else { (center + half).min(1.0) };
    Some((lo, hi))
}

/// Independent seed per (sweep point, trial).
pub fn trial_seed(base_seed: u64, point: usize, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update((point as u64).to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
