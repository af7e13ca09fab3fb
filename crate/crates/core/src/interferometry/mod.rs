//! Off-axis interferometry: synthesis of camera images and extraction of the
//! intensity-dependent phase shift from a high-power/low-power image pair.

pub mod binning;
pub mod field;
pub mod fourier;
pub mod synth;
pub mod unwrap;

pub use binning::{bin_by_intensity, BinningOptions, PhaseShiftCurve, CURVE_CSV_HEADER};
pub use field::{wrap_to_pi, ComplexFieldMap, ScalarFieldMap, DEFAULT_PIXEL_PITCH_UM};
pub use fourier::{
    demodulate_phase, fft2d, locate_carrier_peaks, spectrum, CarrierPeaks, Demodulated,
    DemodulationOptions, Sideband,
};
pub use synth::{
    add_noise, carrier_bins, gaussian_beam, synthesize_interferogram, BeamProfile, NoiseModel,
};
pub use unwrap::{anchor_to_dark_pixels, subtract_reference, unwrap_phase, unwrap_1d, Unwrapped};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Border excluded from accuracy metrics and binning, in pixels.
pub const BORDER_PIXELS: usize = 16;

/// Root-mean-square difference of two maps over the interior.
pub fn rms_difference<T: Real>(a: &ScalarFieldMap<T>, b: &ScalarFieldMap<T>, border: usize) -> Result<T> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch("maps differ in size".into()));
    }
    let (ia, ib) = (a.interior(border), b.interior(border));
    if ia.is_empty() {
        return Err(Error::Domain("border exclusion leaves no pixels".into()));
    }
    let sum: T = ia.iter().zip(&ib).map(|(&x, &y)| (x - y) * (x - y)).sum();
    Ok((sum / T::from_usize_lossy(ia.len())).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractOptions<T> {
    pub demodulation: DemodulationOptions<T>,
    pub binning: BinningOptions<T>,
}

impl<T: Real> Default for ExtractOptions<T> {
    fn default() -> Self {
        Self {
            demodulation: DemodulationOptions::default(),
            binning: BinningOptions::default(),
        }
    }
}

/// Which image of the pair failed to demodulate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairMember {
    HighPower,
    LowPower,
}

/// Extraction failure, naming the image that failed when it is attributable to one.
#[derive(Debug, thiserror::Error)]
#[error("phase extraction failed")]
pub struct ExtractError {
    pub member: Option<PairMember>,
    #[source]
    pub source: Error,
}

impl ExtractError {
    fn whole(source: Error) -> Self {
        Self { member: None, source }
    }

    fn member(member: PairMember, source: Error) -> Self {
        Self {
            member: Some(member),
            source,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Extraction<T> {
    /// Anchored high-minus-low phase map.
    pub phase_shift: ScalarFieldMap<T>,
    pub curve: PhaseShiftCurve<T>,
    pub high_peaks: CarrierPeaks,
    pub low_peaks: CarrierPeaks,
    pub residual_jumps: usize,
}

/// Demodulates and unwraps both interferograms, subtracts the low-power phase,
/// anchors the difference on the dimmest pixels and bins it by intensity.
pub fn extract_phase_shift<T: Real>(
    high_power: &ScalarFieldMap<T>,
    low_power: &ScalarFieldMap<T>,
    intensity: &ScalarFieldMap<T>,
    options: &ExtractOptions<T>,
) -> std::result::Result<Extraction<T>, ExtractError> {
    if !high_power.same_grid(low_power) || !high_power.same_grid(intensity) {
        return Err(ExtractError::whole(Error::GridMismatch(format!(
                "high {}x{}, low {}x{}, intensity {}x{}",
                high_power.width(),
                high_power.height(),
                low_power.width(),
                low_power.height(),
                intensity.width(),
                intensity.height()
        ))));
    }
    let high = demodulate_phase(high_power, &options.demodulation)
        .map_err(|e| ExtractError::member(PairMember::HighPower, e))?;
    let low = demodulate_phase(low_power, &options.demodulation)
        .map_err(|e| ExtractError::member(PairMember::LowPower, e))?;
    let uh = unwrap_phase(&high.phase);
    let ul = unwrap_phase(&low.phase);
    let diff = subtract_reference(&uh.phase, &ul.phase).map_err(ExtractError::whole)?;
    let anchored =
        anchor_to_dark_pixels(&diff, intensity, options.binning.border).map_err(ExtractError::whole)?;
    let curve = bin_by_intensity(&anchored, intensity, &options.binning).map_err(ExtractError::whole)?;
    Ok(Extraction {
        phase_shift: anchored,
        curve,
        high_peaks: high.peaks,
        low_peaks: low.peaks,
        residual_jumps: uh.residual_jumps + ul.residual_jumps,
    })
}
