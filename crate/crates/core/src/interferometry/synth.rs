//! Beam profiles, interferogram synthesis and noise injection.

use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};

use super::field::{ComplexFieldMap, ScalarFieldMap};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Minimum DC-to-sideband distance in FFT bins.
pub const MIN_CARRIER_BINS: f64 = 4.0;

/// Intensity map of a Gaussian beam and whether the grid is too small for it.
#[derive(Debug, Clone)]
pub struct BeamProfile<T> {
    /// [mW/mm²]
    pub intensity: ScalarFieldMap<T>,
    /// Set when the grid spans less than 2σ in either direction.
    pub undersized: bool,
}

/// I(r) = P/(2πσ²)·exp(−r²/(2σ²)) centred on pixel (w/2, h/2); P in mW, σ
/// and pitch in µm, result in mW/mm².
pub fn gaussian_beam<T: Real>(
    power_mw: T,
    sigma_um: T,
    width: usize,
    height: usize,
    pixel_pitch_um: T,
) -> Result<BeamProfile<T>> {
    if !(power_mw >= T::zero()) {
        return Err(Error::Domain("beam power must be >= 0".into()));
    }
    if !(sigma_um > T::zero()) {
        return Err(Error::Domain("beam width σ must be > 0".into()));
    }
    let sigma_mm = sigma_um * lit(1e-3);
    let peak = power_mw / (T::TAU() * sigma_mm * sigma_mm);
    let (cx, cy) = (width / 2, height / 2);
    let two_s2 = lit::<T>(2.0) * sigma_um * sigma_um;
    let intensity = ScalarFieldMap::from_fn(width, height, pixel_pitch_um, |x, y| {
        let dx = T::from_usize_lossy(x.abs_diff(cx)) * pixel_pitch_um;
        let dy = T::from_usize_lossy(y.abs_diff(cy)) * pixel_pitch_um;
        peak * (-(dx * dx + dy * dy) / two_s2).exp()
    })?;
    let extent = T::from_usize_lossy(width.min(height)) * pixel_pitch_um;
    Ok(BeamProfile {
        intensity,
        undersized: extent < lit::<T>(2.0) * sigma_um,
    })
}

/// Camera image |S·e^{i k·r} + B·e^{iψ(r)}|² for signal field S, reference
/// amplitude B, carrier k [rad/pixel] and reference wavefront
/// ψ(r) = curvature·|r − r_c|² [rad/pixel²] about the image centre.
///
/// Demodulating the positive sideband returns φ_S − ψ.
pub fn synthesize_interferogram<T: Real>(
    signal: &ComplexFieldMap<T>,
    ref_amplitude: T,
    carrier: [T; 2],
    ref_curvature: T,
) -> Result<ScalarFieldMap<T>> {
    let (w, h) = (signal.width(), signal.height());
    let bins = carrier_bins(carrier, w, h);
    if bins < MIN_CARRIER_BINS {
        return Err(Error::CarrierSeparation {
            bins,
            min: MIN_CARRIER_BINS,
        });
    }
    let cx = T::from_usize_lossy(w / 2);
    let cy = T::from_usize_lossy(h / 2);
    let mut values = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let xf = T::from_usize_lossy(x);
            let yf = T::from_usize_lossy(y);
            let s = signal.values()[y * w + x] * Complex::from_polar(T::one(), carrier[0] * xf + carrier[1] * yf);
            let r2 = (xf - cx) * (xf - cx) + (yf - cy) * (yf - cy);
            let r = Complex::from_polar(ref_amplitude, ref_curvature * r2);
            values.push((s + r).norm_sqr());
        }
    }
    ScalarFieldMap::new(w, h, signal.pixel_pitch(), values)
}

/// DC-to-sideband distance in FFT bins for a carrier in rad/pixel.
pub fn carrier_bins<T: Real>(carrier: [T; 2], width: usize, height: usize) -> f64 {
    let bx = carrier[0].as_f64() * width as f64 / std::f64::consts::TAU;
    let by = carrier[1].as_f64() * height as f64 / std::f64::consts::TAU;
    bx.hypot(by)
}

/// Camera noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T> {
    /// Photo-electrons per unit image value; `None` disables shot noise.
    pub photons_per_unit: Option<T>,
    /// Relative standard deviation of a shot-to-shot intensity factor.
    pub intensity_jitter: T,
}

impl<T: Real> NoiseModel<T> {
    pub fn none() -> Self {
        Self {
            photons_per_unit: None,
            intensity_jitter: T::zero(),
        }
    }

    /// 1% shot-to-shot intensity jitter, as for an intensity-stabilised laser.
    pub fn locked_laser(photons_per_unit: Option<T>) -> Self {
        Self {
            photons_per_unit,
            intensity_jitter: lit(0.01),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.photons_per_unit.is_none() && self.intensity_jitter == T::zero()
    }
}

/// Applies a shot-to-shot multiplicative factor (1 + jitter·N(0,1)) and
/// per-pixel Poisson shot noise.
pub fn add_noise<T: Real, R: Rng + ?Sized>(
    image: &ScalarFieldMap<T>,
    noise: &NoiseModel<T>,
    rng: &mut R,
) -> Result<ScalarFieldMap<T>> {
    if noise.intensity_jitter < T::zero() {
        return Err(Error::Domain("intensity jitter must be >= 0".into()));
    }
    let factor = if noise.intensity_jitter > T::zero() {
        let n = Normal::new(0.0, noise.intensity_jitter.as_f64())
            .map_err(|e| Error::Domain(e.to_string()))?;
        (1.0 + n.sample(rng)).max(0.0)
    } else {
        1.0
    };
    let photons = match noise.photons_per_unit {
        Some(p) if p > T::zero() => Some(p.as_f64()),
        Some(_) => return Err(Error::Domain("photons per unit must be > 0".into())),
        None => None,
    };
    let mut values = Vec::with_capacity(image.values().len());
    for &v in image.values() {
        let mean = v.as_f64().max(0.0) * factor;
        let out = match photons {
            Some(p) if mean > 0.0 => {
                let counts = Poisson::new(mean * p)
                    .map_err(|e| Error::Domain(e.to_string()))?
                    .sample(rng);
                counts / p
            }
            _ => mean,
        };
        values.push(lit(out));
    }
    ScalarFieldMap::new(image.width(), image.height(), image.pixel_pitch(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane(w: usize, h: usize, amp: f64, phase: f64) -> ComplexFieldMap<f64> {
        ComplexFieldMap::new(w, h, 2.5, vec![Complex::from_polar(amp, phase); w * h]).unwrap()
    }

    #[test]
    fn gaussian_beam_examples() {
        let b = gaussian_beam(0.0, 200.0, 64, 64, 2.5).unwrap();
        assert!(b.intensity.values().iter().all(|v| *v == 0.0));

        let sigma = 200.0;
        let unit_peak_power = std::f64::consts::TAU * (sigma * 1e-3f64).powi(2);
        let b = gaussian_beam(unit_peak_power, sigma, 64, 64, 2.5).unwrap();
        assert!((b.intensity.max() - 1.0).abs() < 1e-12);

        let b = gaussian_beam(1.0_f64, 200.0, 512, 512, 2.5).unwrap();
        // 1 mW over 2π(0.2 mm)² gives 3.98 mW/mm².
        assert!((b.intensity.max() - 3.9789).abs() < 1e-4);
        assert!(!b.undersized);
        let total: f64 = b.intensity.values().iter().sum::<f64>() * (2.5e-3f64).powi(2);
        assert!((total - 1.0).abs() < 0.01, "{total}");

        assert!(gaussian_beam(1.0, 200.0, 64, 64, 2.5).unwrap().undersized);
        assert!(gaussian_beam(1.0, 0.0, 64, 64, 2.5).is_err());
    }

    #[test]
    fn zero_signal_gives_flat_reference() {
        let s = plane(32, 32, 0.0, 0.0);
        let img = synthesize_interferogram(&s, 0.7, [0.0, std::f64::consts::TAU / 8.0], 0.0).unwrap();
        assert!(img.values().iter().all(|v| (v - 0.49).abs() < 1e-15));
    }

    #[test]
    fn equal_plane_waves_give_unit_contrast_sinusoid() {
        let s = plane(40, 16, 1.0, 0.0);
        let k = std::f64::consts::TAU / 10.0;
        let img = synthesize_interferogram(&s, 1.0, [k, 0.0], 0.0).unwrap();
        for x in 0..40 {
            let expect = 2.0 + 2.0 * (k * x as f64).cos();
            assert!((img.get(x, 3) - expect).abs() < 1e-12);
        }
        assert!((img.max() - 4.0).abs() < 1e-12);
        assert!(img.min().abs() < 1e-12);
    }

    #[test]
    fn phase_bump_bends_fringes_by_its_fraction_of_a_period() {
        // Bright fringe position x with k·x + φ = 2πm moves by −φ/k.
        let k = std::f64::consts::TAU / 10.0;
        let s = plane(64, 16, 1.0, 0.3);
        let img = synthesize_interferogram(&s, 1.0, [k, 0.0], 0.0).unwrap();
        let row: Vec<f64> = (0..64).map(|x| img.get(x, 8)).collect();
        // Sub-pixel fringe centre from the fundamental Fourier component over 20 px.
        let (mut c, mut s_) = (0.0, 0.0);
        for (x, v) in row.iter().enumerate().take(60).skip(40) {
            c += v * (k * x as f64).cos();
            s_ += v * (k * x as f64).sin();
        }
        let phase = (-s_).atan2(c);
        let shift_periods = phase / std::f64::consts::TAU;
        assert!((shift_periods - 0.3 / std::f64::consts::TAU).abs() < 1e-9);
        assert!((shift_periods - 0.048).abs() < 1e-3);
    }

    #[test]
    fn small_carrier_is_rejected() {
        let s = plane(64, 64, 1.0, 0.0);
        let k = std::f64::consts::TAU * 3.0 / 64.0;
        match synthesize_interferogram(&s, 1.0, [k, 0.0], 0.0) {
            Err(Error::CarrierSeparation { bins, .. }) => assert!((bins - 3.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn noise_is_seeded_and_unbiased() {
        let img = ScalarFieldMap::filled(64, 64, 2.5, 1.0).unwrap();
        let noise = NoiseModel::locked_laser(Some(1e4));
        let a = add_noise(&img, &noise, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let b = add_noise(&img, &noise, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        let c = add_noise(&img, &noise, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let mean = a.values().iter().sum::<f64>() / 4096.0;
        assert!((mean - 1.0).abs() < 0.05);
        let clean = add_noise(&img, &NoiseModel::none(), &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
        assert_eq!(clean, img);
    }
}
