//! Test fields used by the verification families.

use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::geometry::Geometry;
use crate::spectral::SpectralField;

/// `count` distinct modes with `m, n <= max_mode` and amplitudes uniform in `[-1, 1]`,
/// plus the ground state with amplitude `1` so the field is not small.
pub fn random_field(geometry: &Arc<Geometry>, count: usize, max_mode: usize, seed: u64) -> Result<SpectralField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_mode = max_mode.min(geometry.modes());
    let mut modes: Vec<(usize, usize, f64)> = vec![(1, 1, 1.0)];
    while modes.len() < count.min(max_mode * max_mode) {
        let m = rng.random_range(1..=max_mode);
        let n = rng.random_range(1..=max_mode);
        let a: f64 = rng.random_range(-1.0..=1.0);
        if let Some(e) = modes.iter_mut().find(|e| e.0 == m && e.1 == n) {
            e.2 += 0.5 * a;
        } else {
            modes.push((m, n, a));
        }
    }
    SpectralField::from_modes(geometry, &modes)
}

/// `w_1`, `w_{12}` and `count - 2` random five-mode fields seeded from `seed`.
pub fn standard_family(geometry: &Arc<Geometry>, count: usize, seed: u64) -> Result<Vec<(String, SpectralField)>> {
    let mut out = vec![
        ("w11".to_string(), SpectralField::mode(geometry, 1, 1, 1.0)?),
        ("w12".to_string(), SpectralField::mode(geometry, 1, 2, 1.0)?),
    ];
    for k in 0..count.saturating_sub(2) {
        let s = seed.wrapping_add(k as u64);
        out.push((format!("random{k}"), random_field(geometry, 5, 6, s)?));
    }
    out.truncate(count);
    Ok(out)
}

/// Projection of the constant `1` onto the sine modes with `m, n <= modes`.
pub fn truncated_constant(geometry: &Arc<Geometry>, modes: usize) -> SpectralField {
    let l = geometry.side();
    let pi2 = std::f64::consts::PI.powi(2);
    let modes = modes.min(geometry.modes());
    let k = geometry.modes();
    let c = Array2::from_shape_fn((k, k), |(a, b)| {
        let (m, n) = (a + 1, b + 1);
        if m <= modes && n <= modes && m % 2 == 1 && n % 2 == 1 {
            8.0 * l / (pi2 * (m * n) as f64)
        } else {
            0.0
        }
    });
    SpectralField::from_coeffs(geometry, c).expect("shape matches geometry")
}
