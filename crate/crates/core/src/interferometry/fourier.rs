//! Off-axis demodulation: 2-D FFT, carrier-peak search and sideband isolation.

use num_complex::Complex;
use rustfft::FftPlanner;

use super::field::{ComplexFieldMap, ScalarFieldMap};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Threshold multiplier per step of the peak search.
pub const THRESHOLD_STEP: f64 = 0.9;
/// Peak search gives up below this fraction of the spectral maximum.
pub const THRESHOLD_FLOOR: f64 = 1e-8;
/// Width of the raised-cosine edge of the sideband window, in bins.
pub const WINDOW_TAPER_BINS: f64 = 4.0;

/// In-place 2-D DFT of a row-major `width`×`height` buffer. The inverse is
/// normalised by 1/(width·height).
pub fn fft2d<T: Real>(data: &mut [Complex<T>], width: usize, height: usize, inverse: bool) {
    assert_eq!(data.len(), width * height);
    let mut planner = FftPlanner::<T>::new();
    let (row, col) = if inverse {
        (planner.plan_fft_inverse(width), planner.plan_fft_inverse(height))
    } else {
        (planner.plan_fft_forward(width), planner.plan_fft_forward(height))
    };
    row.process(data);
    let mut column = vec![Complex::new(T::zero(), T::zero()); height];
    for x in 0..width {
        for y in 0..height {
            column[y] = data[y * width + x];
        }
        col.process(&mut column);
        for y in 0..height {
            data[y * width + x] = column[y];
        }
    }
    if inverse {
        let norm = T::one() / T::from_usize_lossy(width * height);
        for v in data.iter_mut() {
            *v *= norm;
        }
    }
}

/// Forward 2-D spectrum of a real image.
pub fn spectrum<T: Real>(image: &ScalarFieldMap<T>) -> ComplexFieldMap<T> {
    let mut data: Vec<_> = image
        .values()
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .collect();
    fft2d(&mut data, image.width(), image.height(), false);
    ComplexFieldMap::new(image.width(), image.height(), image.pixel_pitch(), data)
        .expect("spectrum of a valid image is finite")
}

/// Signed frequency index of bin `k` on an axis of length `n`.
#[inline]
pub fn signed_bin(k: usize, n: usize) -> isize {
    if k < n.div_ceil(2) {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Peak positions as signed bin offsets (x, y).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CarrierPeaks {
    pub dc: (isize, isize),
    /// Sideband with positive x offset (positive y if x is zero).
    pub plus: (isize, isize),
    pub minus: (isize, isize),
    /// Number of threshold steps taken.
    pub steps: usize,
}

impl CarrierPeaks {
    /// DC-to-sideband distance in bins.
    pub fn separation(&self) -> f64 {
        let dx = (self.plus.0 - self.dc.0) as f64;
        let dy = (self.plus.1 - self.dc.1) as f64;
        dx.hypot(dy)
    }
}

/// Finds DC and the two carrier sidebands in a Fourier magnitude map laid out
/// in native DFT order.
///
/// The map is binarised with a threshold that starts at the global maximum
/// and descends by ×0.9 per step until exactly three 8-connected components
/// remain; each component contributes its brightest bin.
pub fn locate_carrier_peaks<T: Real>(magnitude: &ScalarFieldMap<T>) -> Result<CarrierPeaks> {
    let (w, h) = (magnitude.width(), magnitude.height());
    // Centre the spectrum so that the DC blob is not split across corners.
    let (ox, oy) = (w / 2, h / 2);
    let shifted: Vec<f64> = (0..h)
        .flat_map(|sy| {
            (0..w).map(move |sx| ((sx + w - ox) % w, (sy + h - oy) % h))
        })
        .map(|(x, y)| magnitude.get(x, y).as_f64())
        .collect();
    let max = shifted.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::PeakDetection("Fourier magnitude is identically zero".into()));
    }
    let floor = max * THRESHOLD_FLOOR;
    let mut threshold = max;
    let mut steps = 0;
    let mut labels = vec![0u32; w * h];
    let mut last_count = 0;
    while threshold >= floor {
        let comps = label_components(&shifted, w, h, threshold, &mut labels);
        last_count = comps.len();
        if comps.len() == 3 {
            let to_signed = |i: usize| {
                let (sx, sy) = (i % w, i / w);
                (sx as isize - ox as isize, sy as isize - oy as isize)
            };
            let mut peaks: Vec<(isize, isize)> = comps.iter().map(|&i| to_signed(i)).collect();
            let dc_idx = (0..3)
                .min_by_key(|&k| peaks[k].0 * peaks[k].0 + peaks[k].1 * peaks[k].1)
                .unwrap();
            let dc = peaks.remove(dc_idx);
            let (a, b) = (peaks[0], peaks[1]);
            let a_first = (a.0 - dc.0, a.1 - dc.1) > (0, 0);
            let (plus, minus) = if a_first { (a, b) } else { (b, a) };
            if plus.0 - dc.0 < 0 || (plus.0 == dc.0 && plus.1 <= dc.1) {
                return Err(Error::PeakDetection(
                    "sidebands are not on opposite sides of DC".into(),
                ));
            }
            return Ok(CarrierPeaks {
                dc,
                plus,
                minus,
                steps,
            });
        }
        threshold *= THRESHOLD_STEP;
        steps += 1;
    }
    Err(Error::PeakDetection(format!(
        "threshold floor reached without isolating DC and two sidebands \
         (last pass found {last_count} components); fringes may be ambiguous"
    )))
}

/// Labels 8-connected regions above `threshold` and returns the index of the
/// brightest pixel of each region, ordered by first appearance.
fn label_components(values: &[f64], w: usize, h: usize, threshold: f64, labels: &mut [u32]) -> Vec<usize> {
    labels.iter_mut().for_each(|l| *l = 0);
    let mut peaks = Vec::new();
    let mut stack = Vec::new();
    for start in 0..values.len() {
        if labels[start] != 0 || values[start] < threshold {
            continue;
        }
        let label = peaks.len() as u32 + 1;
        labels[start] = label;
        stack.push(start);
        let mut best = start;
        while let Some(i) = stack.pop() {
            if values[i] > values[best] {
                best = i;
            }
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if labels[j] == 0 && values[j] >= threshold {
                        labels[j] = label;
                        stack.push(j);
                    }
                }
            }
        }
        peaks.push(best);
        // More components than needed cannot shrink back to three at this threshold.
        if peaks.len() > 3 {
            break;
        }
    }
    peaks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Sideband {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DemodulationOptions<T> {
    /// Window radius in bins; half the DC-to-sideband distance when absent.
    pub window_radius: Option<T>,
    pub sideband: Sideband,
}

impl<T> Default for DemodulationOptions<T> {
    fn default() -> Self {
        Self {
            window_radius: None,
            sideband: Sideband::Plus,
        }
    }
}

/// Result of demodulating one interferogram.
#[derive(Debug, Clone)]
pub struct Demodulated<T> {
    /// Wrapped phase in (−π, π].
    pub phase: ScalarFieldMap<T>,
    /// Complex field recovered from the isolated sideband.
    pub field: ComplexFieldMap<T>,
    pub peaks: CarrierPeaks,
    pub window_radius: T,
}

/// Raised-cosine window weight at distance `r` for outer radius `radius`.
fn window_weight(r: f64, radius: f64) -> f64 {
    let inner = (radius - WINDOW_TAPER_BINS).max(0.0);
    if r <= inner {
        1.0
    } else if r >= radius {
        0.0
    } else {
        0.5 * (1.0 + (std::f64::consts::PI * (r - inner) / (radius - inner)).cos())
    }
}

/// Isolates a carrier sideband with a circular raised-cosine window, shifts it
/// to zero frequency and returns the argument of the inverse transform.
pub fn demodulate_phase<T: Real>(
    interferogram: &ScalarFieldMap<T>,
    options: &DemodulationOptions<T>,
) -> Result<Demodulated<T>> {
    let (w, h) = (interferogram.width(), interferogram.height());
    let spec = spectrum(interferogram);
    let peaks = locate_carrier_peaks(&spec.amplitude())?;
    let separation = peaks.separation();
    let radius = match options.window_radius {
        Some(r) if r > T::zero() => r.as_f64(),
        Some(_) => return Err(Error::Domain("window radius must be > 0".into())),
        None => separation / 2.0,
    };
    let centre = match options.sideband {
        Sideband::Plus => peaks.plus,
        Sideband::Minus => peaks.minus,
    };
    let mut shifted = vec![Complex::new(T::zero(), T::zero()); w * h];
    for y in 0..h {
        for x in 0..w {
            let fx = signed_bin(x, w) - centre.0;
            let fy = signed_bin(y, h) - centre.1;
            // Distance on the periodic frequency grid.
            let dx = wrap_offset(fx, w) as f64;
            let dy = wrap_offset(fy, h) as f64;
            let weight = window_weight(dx.hypot(dy), radius);
            if weight == 0.0 {
                continue;
            }
            let tx = (x as isize - centre.0).rem_euclid(w as isize) as usize;
            let ty = (y as isize - centre.1).rem_euclid(h as isize) as usize;
            shifted[ty * w + tx] = spec.values()[y * w + x] * lit::<T>(weight);
        }
    }
    fft2d(&mut shifted, w, h, true);
    let field = ComplexFieldMap::new(w, h, interferogram.pixel_pitch(), shifted)?;
    Ok(Demodulated {
        phase: field.phase(),
        field,
        peaks,
        window_radius: lit(radius),
    })
}

fn wrap_offset(d: isize, n: usize) -> isize {
    let n = n as isize;
    let r = d.rem_euclid(n);
    if r > n / 2 {
        r - n
    } else {
        r
    }
}
