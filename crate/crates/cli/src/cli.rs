use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rydkerr::BlockadeKind;

#[derive(Debug, Parser)]
#[command(name = "rydkerr", version, about = "Kerr response of Rydberg excitons: forward model and phase-shift analysis")]
pub struct Cli {
    #[command(flatten)]
    pub globals: Globals,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Globals {
    /// JSON exciton-series configuration
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    /// Seed for every random stream
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Overrides the blockade mode of the configuration: none, broadening, saturable or combined
    #[arg(long, global = true)]
    pub blockade: Option<BlockadeKind>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Susceptibility, n₂ and absorption spectra as CSV
    Spectrum(SpectrumArgs),
    /// Synthetic high/low-power interferogram pair with its intensity map
    Synth(SynthArgs),
    /// Phase-shift curve Δφ(I) from an interferogram pair
    Extract(ExtractArgs),
    /// Saturable fits, n₂ and the I_sat(n) power law from phase-shift curves
    Fit(FitArgs),
    /// Runs a manifest of steps, skipping those whose inputs are unchanged
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Lowest principal quantum number in the sums
    #[arg(long)]
    pub nmin: Option<u32>,
    /// Highest principal quantum number in the sums
    #[arg(long)]
    pub nmax: Option<u32>,
    /// Lower edge of the binding-energy axis [meV]
    #[arg(long, default_value_t = -2.0, allow_hyphen_values = true)]
    pub eb_min: f64,
    /// Upper edge of the binding-energy axis [meV]
    #[arg(long, default_value_t = 35.0, allow_hyphen_values = true)]
    pub eb_max: f64,
    /// Grid step [µeV]
    #[arg(long, default_value_t = 1.0)]
    pub step: f64,
    /// Write only the χ⁽³⁾ columns
    #[arg(long)]
    pub chi3_only: bool,
    /// Input intensity at which α is evaluated [mW/mm²]
    #[arg(long, default_value_t = 0.0)]
    pub probe_intensity: f64,
    /// Input intensities for an additional Δφ table [mW/mm²]
    #[arg(long, value_delimiter = ',')]
    pub intensities: Vec<f64>,
    /// Base name of the output files
    #[arg(long, default_value = "spectrum")]
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Δφ = peak_phase·I/I_max
    Linear,
    /// Δφ = α·I/(1 + I/I_sat)
    Saturable,
    /// Δφ from the forward model at one photon energy
    Model,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Image width and height [pixels]
    #[arg(long, default_value_t = 512)]
    pub size: usize,
    /// Pixel pitch [µm]
    #[arg(long, default_value_t = 2.5)]
    pub pitch: f64,
    /// High-power beam power [mW]
    #[arg(long, default_value_t = 1.0)]
    pub power: f64,
    /// Gaussian beam σ [µm]
    #[arg(long, default_value_t = 200.0)]
    pub sigma: f64,
    /// Ratio of the low-power to the high-power beam power
    #[arg(long, default_value_t = 0.01)]
    pub low_fraction: f64,
    #[arg(long, value_enum, default_value_t = Profile::Linear)]
    pub profile: Profile,
    /// Peak phase shift of the linear profile [rad]
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    pub peak_phase: f64,
    /// Initial slope of the saturable profile [rad·mm²/mW]
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    /// Saturation intensity of the saturable profile [mW/mm²]
    #[arg(long)]
    pub isat: Option<f64>,
    /// Photon energy of the model profile [eV]
    #[arg(long)]
    pub energy: Option<f64>,
    /// Resonance the model profile is tuned to; combine with --detuning
    #[arg(long)]
    pub level: Option<u32>,
    /// Detuning from the --level resonance in linewidths
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub detuning: f64,
    /// Fringe period [pixels]
    #[arg(long, default_value_t = 10.0)]
    pub fringe_period: f64,
    /// Fringe direction [degrees from the x axis]
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub fringe_angle: f64,
    /// Reference-beam wavefront curvature shared by both shots [rad/pixel²]
    #[arg(long, default_value_t = 2e-5, allow_hyphen_values = true)]
    pub ref_curvature: f64,
    /// Reference amplitude relative to the signal's peak amplitude
    #[arg(long, default_value_t = 1.0)]
    pub ref_ratio: f64,
    /// Photo-electrons per unit image value (enables shot noise)
    #[arg(long)]
    pub photons: Option<f64>,
    /// Relative shot-to-shot intensity jitter
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SidebandArg {
    Plus,
    Minus,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// High-power interferogram (.rkf or 16-bit .png)
    #[arg(long)]
    pub high: PathBuf,
    /// Low-power interferogram
    #[arg(long)]
    pub low: PathBuf,
    /// High-power intensity map
    #[arg(long)]
    pub intensity: PathBuf,
    /// Factor converting intensity-map values to mW/mm²
    #[arg(long, default_value_t = 1.0)]
    pub intensity_scale: f64,
    #[arg(long, default_value_t = 40)]
    pub bins: usize,
    /// Bin half-width as a fraction of the peak intensity
    #[arg(long, default_value_t = 0.01)]
    pub tolerance: f64,
    /// Excluded frame [pixels]
    #[arg(long, default_value_t = 16)]
    pub border: usize,
    /// Sideband window radius [bins]; half the carrier distance by default
    #[arg(long)]
    pub window_radius: Option<f64>,
    #[arg(long, value_enum, default_value_t = SidebandArg::Plus)]
    pub sideband: SidebandArg,
    /// Photon energy of the measurement [eV], carried into the fit
    #[arg(long)]
    pub energy: Option<f64>,
    /// Resonance the measurement belongs to, carried into the fit
    #[arg(long)]
    pub level: Option<u32>,
    /// Linear transmission of the crystal, carried into the fit
    #[arg(long)]
    pub transmission: Option<f64>,
    /// Base name of the output files
    #[arg(long, default_value = "curve")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Curve CSV files or directories containing them
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Ignore the per-bin standard deviations
    #[arg(long)]
    pub unweighted: bool,
    /// Fit I_sat(n) = A·(n − δ)^b across levels
    #[arg(long)]
    pub scaling: bool,
    /// Quantum defect δ for the scaling fit; taken from the configuration by default
    #[arg(long)]
    pub quantum_defect: Option<f64>,
    /// Transmission for n₂ when a curve carries none
    #[arg(long)]
    pub transmission: Option<f64>,
    /// Crystal length [µm]; taken from the configuration by default
    #[arg(long)]
    pub length: Option<f64>,
    /// Probe wavelength [nm]; derived from the curve's photon energy by default
    #[arg(long)]
    pub wavelength: Option<f64>,
    /// Base name of the output files
    #[arg(long, default_value = "fits")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Manifest JSON
    pub manifest: PathBuf,
    /// Rerun every step even when its inputs are unchanged
    #[arg(long)]
    pub force: bool,
}
