//! Intensity-binned phase-shift curves.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::field::ScalarFieldMap;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const CURVE_CSV_HEADER: &str = "intensity_mW_mm2,dphi_rad,std_rad,npix";

/// Δφ versus intensity with per-bin spread.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PhaseShiftCurve<T> {
    /// Mean intensity of each bin, ascending [mW/mm²].
    pub intensities: Vec<T>,
    /// [rad]
    pub mean_phase: Vec<T>,
    /// Standard deviation of the pixel phases in each bin [rad].
    pub std_phase: Vec<T>,
    pub pixel_counts: Vec<usize>,
}

impl<T: Real> PhaseShiftCurve<T> {
    /// Curve from exact samples (zero spread, one pixel per point).
    pub fn from_samples(intensities: Vec<T>, phases: Vec<T>) -> Result<Self> {
        let n = intensities.len();
        let curve = Self {
            intensities,
            mean_phase: phases,
            std_phase: vec![T::zero(); n],
            pixel_counts: vec![1; n],
        };
        curve.validate()?;
        Ok(curve)
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.intensities.len();
        if self.mean_phase.len() != n || self.std_phase.len() != n || self.pixel_counts.len() != n {
            return Err(Error::Parse("curve columns have different lengths".into()));
        }
        if self.intensities.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Domain("curve intensities must be ascending".into()));
        }
        if self.intensities.iter().any(|i| !(*i >= T::zero() && i.is_finite())) {
            return Err(Error::Domain("curve intensities must be finite and >= 0".into()));
        }
        if self.mean_phase.iter().any(|p| !p.is_finite()) {
            return Err(Error::Domain("curve phases must be finite".into()));
        }
        if self.std_phase.iter().any(|s| !(*s >= T::zero())) {
            return Err(Error::Domain("curve standard deviations must be >= 0".into()));
        }
        if self.pixel_counts.contains(&0) {
            return Err(Error::Domain("curve bins must contain pixels".into()));
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.len() + 1));
        out.push_str(CURVE_CSV_HEADER);
        out.push('\n');
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{:e},{:e},{:e},{}",
                self.intensities[i].as_f64(),
                self.mean_phase[i].as_f64(),
                self.std_phase[i].as_f64(),
                self.pixel_counts[i]
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty curve file".into()))?;
        if header.trim() != CURVE_CSV_HEADER {
            return Err(Error::Parse(format!(
                "unexpected curve header `{}`, expected `{CURVE_CSV_HEADER}`",
                header.trim()
            )));
        }
        let mut c = Self {
            intensities: vec![],
            mean_phase: vec![],
            std_phase: vec![],
            pixel_counts: vec![],
        };
        for (k, line) in lines.enumerate() {
            let cols: Vec<_> = line.split(',').map(str::trim).collect();
            let bad = || Error::Parse(format!("curve row {}: `{line}`", k + 1));
            if cols.len() != 4 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map(|v| T::lit(v)).map_err(|_| bad());
            c.intensities.push(num(cols[0])?);
            c.mean_phase.push(num(cols[1])?);
            c.std_phase.push(num(cols[2])?);
            c.pixel_counts.push(cols[3].parse().map_err(|_| bad())?);
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinningOptions<T> {
    /// Number of target intensities spread evenly over [0, I_max]; at least 2.
    pub n_bins: usize,
    /// Half-width of each bin as a fraction of I_max.
    pub tolerance: T,
    /// Pixels within this distance of the image edge are ignored.
    pub border: usize,
}

impl<T: Real> Default for BinningOptions<T> {
    fn default() -> Self {
        Self {
            n_bins: 40,
            tolerance: T::lit(0.01),
            border: 16,
        }
    }
}

/// Averages the phase over pixels whose intensity lies within `tolerance·I_max`
/// of each target intensity j·I_max/(n_bins − 1). Empty bins are dropped. The
/// curve is anchored by subtracting its value linearly extrapolated to I = 0
/// from the two lowest bins.
pub fn bin_by_intensity<T: Real>(
    phase: &ScalarFieldMap<T>,
    intensity: &ScalarFieldMap<T>,
    options: &BinningOptions<T>,
) -> Result<PhaseShiftCurve<T>> {
    if !phase.same_grid(intensity) {
        return Err(Error::GridMismatch(format!(
            "phase map is {}x{}, intensity map is {}x{}",
            phase.width(),
            phase.height(),
            intensity.width(),
            intensity.height()
        )));
    }
    if options.n_bins < 2 {
        return Err(Error::Domain("at least two intensity bins are required".into()));
    }
    if !(options.tolerance > T::zero()) {
        return Err(Error::Domain("bin tolerance must be > 0".into()));
    }
    let inten = intensity.interior(options.border);
    let ph = phase.interior(options.border);
    if inten.is_empty() {
        return Err(Error::Domain("border exclusion leaves no pixels".into()));
    }
    let i_max = inten.iter().copied().fold(T::zero(), T::max);
    if !(i_max > T::zero()) {
        return Err(Error::Domain("intensity map has no positive pixels".into()));
    }
    let half_width = options.tolerance * i_max;
    let step = i_max / T::from_usize_lossy(options.n_bins - 1);

    let mut curve = PhaseShiftCurve {
        intensities: vec![],
        mean_phase: vec![],
        std_phase: vec![],
        pixel_counts: vec![],
    };
    for j in 0..options.n_bins {
        let target = step * T::from_usize_lossy(j);
        let (mut n, mut si, mut sp) = (0usize, T::zero(), T::zero());
        for (&i, &p) in inten.iter().zip(&ph) {
            if (i - target).abs() <= half_width {
                n += 1;
                si += i;
                sp += p;
            }
        }
        if n == 0 {
            continue;
        }
        let nf = T::from_usize_lossy(n);
        let mean = sp / nf;
        let mut var = T::zero();
        for (&i, &p) in inten.iter().zip(&ph) {
            if (i - target).abs() <= half_width {
                var += (p - mean) * (p - mean);
            }
        }
        curve.intensities.push(si / nf);
        curve.mean_phase.push(mean);
        curve.std_phase.push((var / nf).sqrt());
        curve.pixel_counts.push(n);
    }
    if curve.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: curve.len(),
        });
    }
    let (i0, i1) = (curve.intensities[0], curve.intensities[1]);
    let (p0, p1) = (curve.mean_phase[0], curve.mean_phase[1]);
    let intercept = if i1 > i0 {
        p0 - i0 * (p1 - p0) / (i1 - i0)
    } else {
        p0
    };
    for p in &mut curve.mean_phase {
        *p -= intercept;
    }
    Ok(curve)
}
