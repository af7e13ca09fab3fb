//! Sequential (Itoh) phase unwrapping and reference subtraction.

use super::field::{wrap_to_pi, ScalarFieldMap};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone)]
pub struct Unwrapped<T> {
    pub phase: ScalarFieldMap<T>,
    /// Adjacent-pixel pairs (horizontal or vertical) still differing by more than π.
    pub residual_jumps: usize,
}

impl<T> Unwrapped<T> {
    pub fn is_clean(&self) -> bool {
        self.residual_jumps == 0
    }
}

/// Unwraps every row left to right, then aligns the rows by unwrapping the
/// centre column top to bottom and shifting each row by the resulting 2π multiple.
pub fn unwrap_phase<T: Real>(wrapped: &ScalarFieldMap<T>) -> Unwrapped<T> {
    let (w, h) = (wrapped.width(), wrapped.height());
    let mut v = wrapped.values().to_vec();
    for row in v.chunks_exact_mut(w) {
        unwrap_1d(row);
    }
    let c = w / 2;
    for y in 1..h {
        let prev = v[(y - 1) * w + c];
        let cur = v[y * w + c];
        let target = prev + wrap_to_pi(cur - prev);
        let offset = target - cur;
        if offset != T::zero() {
            for x in 0..w {
                v[y * w + x] += offset;
            }
        }
    }
    let pi = T::PI();
    let mut residual = 0;
    for y in 0..h {
        for x in 0..w {
            let here = v[y * w + x];
            if x + 1 < w && (v[y * w + x + 1] - here).abs() > pi {
                residual += 1;
            }
            if y + 1 < h && (v[(y + 1) * w + x] - here).abs() > pi {
                residual += 1;
            }
        }
    }
    let phase = ScalarFieldMap::new(w, h, wrapped.pixel_pitch(), v)
        .expect("unwrapping preserves finiteness");
    Unwrapped {
        phase,
        residual_jumps: residual,
    }
}

/// Itoh's method on one line: integrates the wrapped differences.
pub fn unwrap_1d<T: Real>(line: &mut [T]) {
    let mut offset = T::zero();
    let two_pi = T::TAU();
    for i in 1..line.len() {
        let raw = line[i] + offset;
        let d = raw - line[i - 1];
        if d > T::PI() || d <= -T::PI() {
            offset -= two_pi * (d / two_pi).round();
            // Keep the jump in (−π, π] when the rounding lands on the boundary.
            let d2 = line[i] + offset - line[i - 1];
            if d2 > T::PI() {
                offset -= two_pi;
            } else if d2 <= -T::PI() {
                offset += two_pi;
            }
        }
        line[i] += offset;
    }
}

/// Difference of two phase maps on the same grid.
pub fn subtract_reference<T: Real>(
    high_power: &ScalarFieldMap<T>,
    low_power: &ScalarFieldMap<T>,
) -> Result<ScalarFieldMap<T>> {
    if !high_power.same_grid(low_power) {
        return Err(Error::GridMismatch(format!(
            "high-power map is {}x{}, low-power map is {}x{}",
            high_power.width(),
            high_power.height(),
            low_power.width(),
            low_power.height()
        )));
    }
    ScalarFieldMap::new(
        high_power.width(),
        high_power.height(),
        high_power.pixel_pitch(),
        high_power
            .values()
            .iter()
            .zip(low_power.values())
            .map(|(&a, &b)| a - b)
            .collect(),
    )
}

/// Fraction of the peak intensity below which pixels define the zero-phase level.
pub const ANCHOR_INTENSITY_FRACTION: f64 = 0.02;

/// Shifts a phase-difference map so that its mean over the dimmest pixels
/// (intensity ≤ 2% of the maximum, outside `border`) is zero.
pub fn anchor_to_dark_pixels<T: Real>(
    phase: &ScalarFieldMap<T>,
    intensity: &ScalarFieldMap<T>,
    border: usize,
) -> Result<ScalarFieldMap<T>> {
    if !phase.same_grid(intensity) {
        return Err(Error::GridMismatch("phase and intensity maps differ in size".into()));
    }
    let (w, h) = (phase.width(), phase.height());
    let limit = intensity.max() * lit(ANCHOR_INTENSITY_FRACTION);
    let mut sum = T::zero();
    let mut count = 0usize;
    for y in border..h.saturating_sub(border) {
        for x in border..w.saturating_sub(border) {
            if intensity.get(x, y) <= limit {
                sum += phase.get(x, y);
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::Domain(
            "no low-intensity pixels to anchor the phase; widen the field of view".into(),
        ));
    }
    let offset = sum / T::from_usize_lossy(count);
    phase.map(|v| v - offset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wrapped(m: &ScalarFieldMap<f64>) -> ScalarFieldMap<f64> {
        m.map(wrap_to_pi).unwrap()
    }

    fn assert_equal_up_to_constant(a: &ScalarFieldMap<f64>, b: &ScalarFieldMap<f64>, tol: f64) {
        let c = a.values()[0] - b.values()[0];
        for (u, v) in a.values().iter().zip(b.values()) {
            assert!((u - v - c).abs() <= tol, "{u} {v} {c}");
        }
    }

    #[test]
    fn smooth_map_unchanged() {
        let m = ScalarFieldMap::from_fn(32, 16, 1.0, |x, y| 0.1 * x as f64 - 0.05 * y as f64).unwrap();
        let u = unwrap_phase(&m);
        assert!(u.is_clean());
        assert_equal_up_to_constant(&u.phase, &m, 1e-12);
    }

    #[test]
    fn linear_ramp_restored() {
        let n = 64;
        let ramp = ScalarFieldMap::from_fn(n, 8, 1.0, |x, _| {
            4.0 * std::f64::consts::PI * x as f64 / (n - 1) as f64
        })
        .unwrap();
        let u = unwrap_phase(&wrapped(&ramp));
        assert_equal_up_to_constant(&u.phase, &ramp, 1e-12);
    }

    #[test]
    fn gaussian_bump_of_three_radians_restored() {
        let bump = ScalarFieldMap::from_fn(64, 64, 1.0, |x, y| {
            let (dx, dy) = (x as f64 - 32.0, y as f64 - 30.0);
            3.0 * (-(dx * dx + dy * dy) / 120.0).exp() + 2.0
        })
        .unwrap();
        let u = unwrap_phase(&wrapped(&bump));
        assert!(u.is_clean());
        assert_equal_up_to_constant(&u.phase, &bump, 1e-9);
    }

    #[test]
    fn noise_leaves_residual_jumps() {
        // Uniform pseudo-random phases violate the gradient condition everywhere.
        let mut state = 12345u64;
        let m = ScalarFieldMap::from_fn(16, 16, 1.0, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * std::f64::consts::TAU
        })
        .unwrap();
        assert!(unwrap_phase(&m).residual_jumps > 0);
    }

    #[test]
    fn subtraction() {
        let a = ScalarFieldMap::from_fn(16, 16, 1.0, |x, y| ((x * y) as f64).sin()).unwrap();
        assert!(subtract_reference(&a, &a).unwrap().values().iter().all(|v| *v == 0.0));
        let aberr = ScalarFieldMap::from_fn(16, 16, 1.0, |x, y| {
            0.01 * ((x as f64 - 8.0).powi(2) + (y as f64 - 8.0).powi(2))
        })
        .unwrap();
        let high = ScalarFieldMap::new(16, 16, 1.0, a.values().iter().zip(aberr.values()).map(|(p, q)| p + q).collect()).unwrap();
        let d = subtract_reference(&high, &aberr).unwrap();
        for (u, v) in d.values().iter().zip(a.values()) {
            assert!((u - v).abs() < 1e-12);
        }
        let small = ScalarFieldMap::filled(8, 8, 1.0, 0.0).unwrap();
        assert!(matches!(subtract_reference(&a, &small), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn anchoring_zeroes_dark_region() {
        let inten = ScalarFieldMap::from_fn(32, 32, 1.0, |x, _| x as f64).unwrap();
        let ph = ScalarFieldMap::filled(32, 32, 1.0, 0.7).unwrap();
        let a = anchor_to_dark_pixels(&ph, &inten, 0).unwrap();
        assert!(a.values().iter().all(|v| v.abs() < 1e-15));
    }

    proptest! {
        #[test]
        fn adding_two_pi_preserves_differences(k in -3i32..3, seed in 0u64..1000) {
            let m = ScalarFieldMap::from_fn(24, 24, 1.0, |x, y| {
                let t = (x as f64 * 0.3 + y as f64 * 0.2 + seed as f64).sin() * 2.5;
                wrap_to_pi(t + 0.4 * x as f64)
            }).unwrap();
            let shifted = m.map(|v| v + std::f64::consts::TAU * k as f64).unwrap();
            let a = unwrap_phase(&m).phase;
            let b = unwrap_phase(&shifted).phase;
            assert_equal_up_to_constant(&a, &b, 1e-9);
        }

        #[test]
        fn scan_path_has_no_large_jumps(slope_x in -2.5f64..2.5, slope_y in -2.5f64..2.5) {
            let m = ScalarFieldMap::from_fn(20, 20, 1.0, |x, y| wrap_to_pi(slope_x * x as f64 + slope_y * y as f64)).unwrap();
            let u = unwrap_phase(&m);
            prop_assert!(u.is_clean());
        }
    }
}
