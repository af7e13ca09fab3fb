//! Pixel grids, the RKF1 raw image format and PNG import.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

/// Default pixel pitch [µm]; a 10-pixel fringe spans about 25 µm.
pub const DEFAULT_PIXEL_PITCH_UM: f64 = 2.5;
/// Smallest accepted width or height.
pub const MIN_DIMENSION: usize = 8;

const RKF1_MAGIC: &str = "RKF1";

fn check_dims(width: usize, height: usize, pitch: f64, len: usize) -> Result<()> {
    if width < MIN_DIMENSION || height < MIN_DIMENSION {
        return Err(Error::Domain(format!(
            "image must be at least {MIN_DIMENSION}x{MIN_DIMENSION}, got {width}x{height}"
        )));
    }
    if !(pitch > 0.0 && pitch.is_finite()) {
        return Err(Error::Domain(format!("pixel pitch must be finite and > 0, got {pitch}")));
    }
    if len != width * height {
        return Err(Error::Domain(format!(
            "expected {} values for {width}x{height}, got {len}",
            width * height
        )));
    }
    Ok(())
}

/// Real-valued image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarFieldMap<T> {
    width: usize,
    height: usize,
    pixel_pitch: T,
    values: Vec<T>,
}

impl<T: Real> ScalarFieldMap<T> {
    pub fn new(width: usize, height: usize, pixel_pitch: T, values: Vec<T>) -> Result<Self> {
        check_dims(width, height, pixel_pitch.as_f64(), values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("image contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch,
            values,
        })
    }

    pub fn filled(width: usize, height: usize, pixel_pitch: T, value: T) -> Result<Self> {
        Self::new(width, height, pixel_pitch, vec![value; width * height])
    }

    /// Builds a map from a function of (x, y) pixel indices.
    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_pitch: T,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, pixel_pitch, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> T {
        self.pixel_pitch
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.values[y * self.width + x]
    }

    pub fn same_grid<U: Real>(&self, other: &ScalarFieldMap<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Applies `f` to every value; the result must stay finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.pixel_pitch,
            self.values.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Circular shift by (dx, dy) pixels.
    pub fn roll(&self, dx: isize, dy: isize) -> Self {
        let (w, h) = (self.width as isize, self.height as isize);
        let mut values = vec![T::zero(); self.values.len()];
        for y in 0..h {
            for x in 0..w {
                let nx = (x + dx).rem_euclid(w) as usize;
                let ny = (y + dy).rem_euclid(h) as usize;
                values[ny * self.width + nx] = self.values[(y * w + x) as usize];
            }
        }
        Self { values, ..self.clone() }
    }

    /// Values of the interior with a `border`-pixel frame removed, row-major.
    pub fn interior(&self, border: usize) -> Vec<T> {
        let mut out = Vec::new();
        if 2 * border >= self.width || 2 * border >= self.height {
            return out;
        }
        for y in border..self.height - border {
            out.extend_from_slice(&self.values[y * self.width + border..(y + 1) * self.width - border]);
        }
        out
    }

    /// Writes the RKF1 format: a header line `RKF1 <w> <h> <pitch_um>` with
    /// optional `key=value` tokens, then little-endian f32 values row-major.
    pub fn write_rkf1<W: Write>(&self, mut out: W, seed: Option<u64>) -> Result<()> {
        let mut header = format!(
            "{RKF1_MAGIC} {} {} {}",
            self.width,
            self.height,
            self.pixel_pitch.as_f64()
        );
        if let Some(s) = seed {
            header.push_str(&format!(" seed={s}"));
        }
        header.push('\n');
        let mut buf = Vec::with_capacity(header.len() + 4 * self.values.len());
        buf.extend_from_slice(header.as_bytes());
        for v in &self.values {
            buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
        out.write_all(&buf)
            .map_err(|e| Error::io("<stream>", e))
    }

    pub fn to_rkf1_bytes(&self, seed: Option<u64>) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_rkf1(&mut buf, seed).expect("writing to memory cannot fail");
        buf
    }

    /// Reads RKF1 data, returning the map and the seed token if present.
    pub fn read_rkf1<R: Read>(input: R) -> Result<(Self, Option<u64>)> {
        let mut reader = BufReader::new(input);
        let mut header = Vec::new();
        reader
            .read_until(b'\n', &mut header)
            .map_err(|e| Error::io("<stream>", e))?;
        if header.last() != Some(&b'\n') {
            return Err(Error::Parse("RKF1 header is not terminated by a newline".into()));
        }
        let header = std::str::from_utf8(&header[..header.len() - 1])
            .map_err(|_| Error::Parse("RKF1 header is not ASCII".into()))?;
        let mut tokens = header.split_ascii_whitespace();
        if tokens.next() != Some(RKF1_MAGIC) {
            return Err(Error::Parse("missing RKF1 magic".into()));
        }
        let mut field = |name: &str| {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("RKF1 header lacks {name}")))
                .map(str::to_string)
        };
        let parse_err = |name: &str| Error::Parse(format!("RKF1 header has an invalid {name}"));
        let width: usize = field("width")?.parse().map_err(|_| parse_err("width"))?;
        let height: usize = field("height")?.parse().map_err(|_| parse_err("height"))?;
        let pitch: f64 = field("pixel pitch")?.parse().map_err(|_| parse_err("pixel pitch"))?;
        let mut seed = None;
        for tok in tokens {
            if let Some(v) = tok.strip_prefix("seed=") {
                seed = Some(v.parse().map_err(|_| parse_err("seed"))?);
            }
        }
        let count = width
            .checked_mul(height)
            .ok_or_else(|| Error::Parse("RKF1 dimensions overflow".into()))?;
        let mut raw = Vec::new();
        reader
            .read_to_end(&mut raw)
            .map_err(|e| Error::io("<stream>", e))?;
        if raw.len() != 4 * count {
            return Err(Error::Parse(format!(
                "RKF1 payload has {} bytes, expected {}",
                raw.len(),
                4 * count
            )));
        }
        let values = raw
            .chunks_exact(4)
            .map(|c| lit::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        Ok((Self::new(width, height, lit(pitch), values)?, seed))
    }

    pub fn load_rkf1(path: impl AsRef<Path>) -> Result<(Self, Option<u64>)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_rkf1(file).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Imports a grayscale PNG, mapping 16-bit values to [0, 1].
    pub fn load_png(path: impl AsRef<Path>, pixel_pitch: T) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
        Self::from_luma16(&img.into_luma16(), pixel_pitch)
    }

    pub fn decode_png(bytes: &[u8], pixel_pitch: T) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
            .map_err(|e| Error::Image(e.to_string()))?;
        Self::from_luma16(&img.into_luma16(), pixel_pitch)
    }

    fn from_luma16(img: &image::ImageBuffer<image::Luma<u16>, Vec<u16>>, pixel_pitch: T) -> Result<Self> {
        let scale = lit::<T>(1.0 / 65535.0);
        let values = img.pixels().map(|p| T::from_u16(p.0[0]).unwrap() * scale).collect();
        Self::new(img.width() as usize, img.height() as usize, pixel_pitch, values)
    }

    /// Loads RKF1 or, for a `.png` extension, PNG.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, Option<u64>)> {
        let path = path.as_ref();
        let is_png = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            Ok((Self::load_png(path, lit(DEFAULT_PIXEL_PITCH_UM))?, None))
        } else {
            Self::load_rkf1(path)
        }
    }
}

/// Complex-valued image (field amplitude and phase), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFieldMap<T> {
    width: usize,
    height: usize,
    pixel_pitch: T,
    values: Vec<Complex<T>>,
}

impl<T: Real> ComplexFieldMap<T> {
    pub fn new(width: usize, height: usize, pixel_pitch: T, values: Vec<Complex<T>>) -> Result<Self> {
        check_dims(width, height, pixel_pitch.as_f64(), values.len())?;
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::Domain("field contains non-finite values".into()));
        }
        Ok(Self {
            width,
            height,
            pixel_pitch,
            values,
        })
    }

    /// Field with amplitude √I and the given phase.
    pub fn from_intensity_phase(intensity: &ScalarFieldMap<T>, phase: &ScalarFieldMap<T>) -> Result<Self> {
        if !intensity.same_grid(phase) {
            return Err(Error::GridMismatch(format!(
                "intensity {}x{} vs phase {}x{}",
                intensity.width(),
                intensity.height(),
                phase.width(),
                phase.height()
            )));
        }
        if intensity.values().iter().any(|v| *v < T::zero()) {
            return Err(Error::Domain("intensity must be >= 0".into()));
        }
        let values = intensity
            .values()
            .iter()
            .zip(phase.values())
            .map(|(&i, &p)| Complex::from_polar(i.sqrt(), p))
            .collect();
        Self::new(intensity.width(), intensity.height(), intensity.pixel_pitch(), values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_pitch(&self) -> T {
        self.pixel_pitch
    }

    pub fn values(&self) -> &[Complex<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.values
    }

    pub fn amplitude(&self) -> ScalarFieldMap<T> {
        self.scalar(|c| c.norm())
    }

    /// Argument in (−π, π].
    pub fn phase(&self) -> ScalarFieldMap<T> {
        self.scalar(|c| wrap_to_pi(c.arg()))
    }

    fn scalar(&self, f: impl Fn(Complex<T>) -> T) -> ScalarFieldMap<T> {
        ScalarFieldMap {
            width: self.width,
            height: self.height,
            pixel_pitch: self.pixel_pitch,
            values: self.values.iter().map(|&c| f(c)).collect(),
        }
    }
}

/// Maps any angle into (−π, π].
pub fn wrap_to_pi<T: Real>(x: T) -> T {
    let two_pi = T::TAU();
    let mut r = x - two_pi * (x / two_pi).round();
    if r <= -T::PI() {
        r += two_pi;
    } else if r > T::PI() {
        r -= two_pi;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_geometry() {
        assert!(ScalarFieldMap::<f64>::filled(4, 16, 2.5, 0.0).is_err());
        assert!(ScalarFieldMap::<f64>::new(8, 8, 2.5, vec![0.0; 63]).is_err());
        assert!(ScalarFieldMap::<f64>::new(8, 8, 0.0, vec![0.0; 64]).is_err());
        assert!(ScalarFieldMap::<f64>::new(8, 8, 2.5, vec![f64::NAN; 64]).is_err());
    }

    #[test]
    fn rkf1_round_trip_with_seed() {
        let m = ScalarFieldMap::from_fn(9, 8, 2.5, |x, y| (x * 10 + y) as f64 * 0.25).unwrap();
        let bytes = m.to_rkf1_bytes(Some(42));
        assert!(bytes.starts_with(b"RKF1 9 8 2.5 seed=42\n"));
        let (back, seed) = ScalarFieldMap::<f64>::read_rkf1(&bytes[..]).unwrap();
        assert_eq!(seed, Some(42));
        assert_eq!(back, m);
        let plain = m.to_rkf1_bytes(None);
        assert!(plain.starts_with(b"RKF1 9 8 2.5\n"));
        assert_eq!(plain.len(), 13 + 4 * 72);
    }

    #[test]
    fn rkf1_rejects_malformed() {
        assert!(ScalarFieldMap::<f64>::read_rkf1(&b"RKF2 8 8 2.5\n"[..]).is_err());
        assert!(ScalarFieldMap::<f64>::read_rkf1(&b"RKF1 8 8 2.5\n\0\0"[..]).is_err());
        assert!(ScalarFieldMap::<f64>::read_rkf1(&b"RKF1 8 x 2.5\n"[..]).is_err());
    }

    #[test]
    fn png_import_scales_to_unit_range() {
        let mut img = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::new(8, 8);
        for (x, y, p) in img.enumerate_pixels_mut() {
            p.0[0] = if (x + y) % 2 == 0 { 65535 } else { 0 };
        }
        let mut bytes = Vec::new();
        img.write_to(&mut std::io::Cursor::new(&mut bytes), image::ImageFormat::Png)
            .unwrap();
        let m = ScalarFieldMap::<f64>::decode_png(&bytes, 2.5).unwrap();
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 0), 0.0);
    }

    #[test]
    fn interior_drops_frame() {
        let m = ScalarFieldMap::from_fn(10, 12, 1.0, |x, y| (y * 10 + x) as f64).unwrap();
        let i = m.interior(2);
        assert_eq!(i.len(), 6 * 8);
        assert_eq!(i[0], 22.0);
    }

    proptest! {
        #[test]
        fn wrap_stays_in_half_open_interval(x in -100.0f64..100.0) {
            let w = wrap_to_pi(x);
            prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            let k = (x - w) / std::f64::consts::TAU;
            prop_assert!((k - k.round()).abs() < 1e-9);
        }
    }
}
