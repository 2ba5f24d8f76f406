//! LED radiation patterns, receiver optical gains, spectral reflectance and
//! diffuse reflection.
//!
//! Radiation patterns are in W/sr for a source of total power 1 W, evaluated
//! at (elevation, azimuth) in the emitter LCS where the element normal is the
//! `x'` axis.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OpticsError {
    #[error("Lambertian order must be non-negative, got {0}")]
    NegativeOrder(f64),
    #[error("radiation pattern has no positive samples")]
    EmptyPattern,
    #[error("invalid radiation pattern: {0}")]
    InvalidPattern(String),
    #[error("angle {0} rad outside [0, π/2]")]
    OutOfRange(f64),
    #[error("reflectance covers [{refl_lo}, {refl_hi}] nm but the source spans [{psd_lo}, {psd_hi}] nm")]
    DomainMismatch {
        psd_lo: f64,
        psd_hi: f64,
        refl_lo: f64,
        refl_hi: f64,
    },
    #[error("source spectrum integrates to {0}, expected 1")]
    NotNormalized(f64),
    #[error("invalid spectral curve: {0}")]
    InvalidCurve(String),
    #[error("invalid receiver optics: {0}")]
    InvalidOptics(String),
}

/// Map an azimuth onto `(-π, π]`.
fn signed_azimuth(az: f64) -> f64 {
    let a = az.rem_euclid(TAU);
    if a > PI {
        a - TAU
    } else {
        a
    }
}

/// `(α+1)/(2π)·cos^α(el)·cos^α(az)` in the forward hemisphere, 0 behind it.
pub fn lambertian_intensity(order: f64, elevation: f64, azimuth: f64) -> Result<f64, OpticsError> {
    if order < 0.0 || order.is_nan() {
        return Err(OpticsError::NegativeOrder(order));
    }
    Ok(lambertian_unchecked(order, elevation, azimuth))
}

fn lambertian_unchecked(order: f64, elevation: f64, azimuth: f64) -> f64 {
    let az = signed_azimuth(azimuth);
    if elevation.abs() > FRAC_PI_2 || az.abs() > FRAC_PI_2 {
        return 0.0;
    }
    let ce = elevation.cos().max(0.0);
    let ca = az.cos().max(0.0);
    (order + 1.0) / TAU * (ce * ca).powf(order)
}

/// Rectangular (elevation, azimuth) grid of intensities, bilinearly
/// interpolated and zero outside the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedPattern {
    /// Strictly increasing elevations, radians.
    elevations: Vec<f64>,
    /// Strictly increasing azimuths in `(-π, π]`, radians.
    azimuths: Vec<f64>,
    /// Row-major `[elevation][azimuth]`.
    values: Vec<f64>,
}

fn check_axis(axis: &[f64], name: &str) -> Result<(), OpticsError> {
    if axis.len() < 2 {
        return Err(OpticsError::InvalidPattern(format!("{name} axis needs at least 2 samples")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) || axis.iter().any(|v| !v.is_finite()) {
        return Err(OpticsError::InvalidPattern(format!("{name} axis must be strictly increasing")));
    }
    Ok(())
}

impl TabulatedPattern {
    /// Build from axes in radians and row-major values.
    pub fn new(elevations: Vec<f64>, azimuths: Vec<f64>, values: Vec<f64>) -> Result<Self, OpticsError> {
        check_axis(&elevations, "elevation")?;
        check_axis(&azimuths, "azimuth")?;
        if elevations[0] < -FRAC_PI_2 - 1e-12 || elevations[elevations.len() - 1] > FRAC_PI_2 + 1e-12 {
            return Err(OpticsError::InvalidPattern("elevations must lie in [-90°, 90°]".into()));
        }
        if azimuths[0] <= -PI - 1e-12 || azimuths[azimuths.len() - 1] > PI + 1e-12 {
            return Err(OpticsError::InvalidPattern("azimuths must lie in (-180°, 180°]".into()));
        }
        if values.len() != elevations.len() * azimuths.len() {
            return Err(OpticsError::InvalidPattern(format!(
                "expected {} values, got {}",
                elevations.len() * azimuths.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OpticsError::InvalidPattern("intensities must be finite and non-negative".into()));
        }
        Ok(Self {
            elevations,
            azimuths,
            values,
        })
    }

    /// Sample `f(elevation, azimuth)` on a regular grid covering the forward
    /// hemisphere with the given step (radians).
    pub fn sample<F: Fn(f64, f64) -> f64>(step: f64, f: F) -> Result<Self, OpticsError> {
        let n = (PI / step).round() as usize;
        if n < 2 {
            return Err(OpticsError::InvalidPattern("sampling step too coarse".into()));
        }
        let axis: Vec<f64> = (0..=n).map(|k| -FRAC_PI_2 + PI * k as f64 / n as f64).collect();
        let mut values = Vec::with_capacity(axis.len() * axis.len());
        for &el in &axis {
            for &az in &axis {
                values.push(f(el, az));
            }
        }
        Self::new(axis.clone(), axis, values)
    }

    /// Parse `elevation_deg,azimuth_deg,intensity` rows (header required).
    pub fn from_csv_str(text: &str) -> Result<Self, OpticsError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| OpticsError::InvalidPattern(e.to_string()))?;
            if rec.len() != 3 {
                return Err(OpticsError::InvalidPattern(format!("expected 3 columns, got {}", rec.len())));
            }
            let parse = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| OpticsError::InvalidPattern(format!("bad number {:?}: {e}", &rec[k])))
            };
            rows.push((parse(0)?.to_radians(), parse(1)?.to_radians(), parse(2)?));
        }
        let mut els: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let mut azs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        for axis in [&mut els, &mut azs] {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        if rows.len() != els.len() * azs.len() {
            return Err(OpticsError::InvalidPattern("grid is not rectangular".into()));
        }
        let mut values = vec![f64::NAN; rows.len()];
        for (el, az, v) in rows {
            let i = els.binary_search_by(|x| x.total_cmp(&el)).unwrap_or_default();
            let j = azs.binary_search_by(|x| x.total_cmp(&az)).unwrap_or_default();
            values[i * azs.len() + j] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(OpticsError::InvalidPattern("grid has duplicate or missing points".into()));
        }
        Self::new(els, azs, values)
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.azimuths.len() + j]
    }

    fn scaled(mut self, k: f64) -> Self {
        for v in &mut self.values {
            *v *= k;
        }
        self
    }

    /// Bilinear interpolation; 0 outside the grid.
    pub fn intensity(&self, elevation: f64, azimuth: f64) -> f64 {
        let az = signed_azimuth(azimuth);
        let (Some((i, u)), Some((j, w))) = (bracket(&self.elevations, elevation), bracket(&self.azimuths, az))
        else {
            return 0.0;
        };
        let v00 = self.at(i, j);
        let v01 = self.at(i, j + 1);
        let v10 = self.at(i + 1, j);
        let v11 = self.at(i + 1, j + 1);
        (1.0 - u) * ((1.0 - w) * v00 + w * v01) + u * ((1.0 - w) * v10 + w * v11)
    }

    /// `∫∫ F(el, az) cos(el) d el d az` by the 2D trapezoidal rule.
    pub fn power_integral(&self) -> f64 {
        let ne = self.elevations.len();
        let na = self.azimuths.len();
        let weights = |axis: &[f64], k: usize| {
            let left = if k > 0 { axis[k] - axis[k - 1] } else { 0.0 };
            let right = if k + 1 < axis.len() { axis[k + 1] - axis[k] } else { 0.0 };
            0.5 * (left + right)
        };
        let mut total = 0.0;
        for i in 0..ne {
            let we = weights(&self.elevations, i) * self.elevations[i].cos().max(0.0);
            for j in 0..na {
                total += we * weights(&self.azimuths, j) * self.at(i, j);
            }
        }
        total
    }
}

/// Index of the lower grid point and the fractional position, or `None`
/// when `x` is outside the axis.
fn bracket(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    if !(x >= axis[0] && x <= axis[n - 1]) {
        return None;
    }
    let k = axis.partition_point(|v| *v <= x).clamp(1, n - 1) - 1;
    Some((k, (x - axis[k]) / (axis[k + 1] - axis[k])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RadiationPattern {
    Lambertian { order: f64 },
    Tabulated(TabulatedPattern),
}

impl RadiationPattern {
    pub fn lambertian(order: f64) -> Result<Self, OpticsError> {
        if order < 0.0 || order.is_nan() {
            return Err(OpticsError::NegativeOrder(order));
        }
        Ok(Self::Lambertian { order })
    }

    /// Radiant intensity in W/sr toward (elevation, azimuth) in the emitter LCS.
    pub fn intensity(&self, elevation: f64, azimuth: f64) -> f64 {
        match self {
            Self::Lambertian { order } => lambertian_unchecked(*order, elevation, azimuth),
            Self::Tabulated(t) => t.intensity(elevation, azimuth),
        }
    }
}

/// Convert a luminous-intensity grid (lm/sr) into a radiation pattern by
/// dividing by the luminous efficacy (lm/W) and normalizing to 1 W total.
pub fn pattern_from_luminous(grid: TabulatedPattern, ler: f64) -> Result<RadiationPattern, OpticsError> {
    if !(ler > 0.0 && ler.is_finite()) {
        return Err(OpticsError::InvalidPattern(format!("luminous efficacy must be positive, got {ler}")));
    }
    let radiant = grid.scaled(1.0 / ler);
    let total = radiant.power_integral();
    if !(total > 0.0) {
        return Err(OpticsError::EmptyPattern);
    }
    Ok(RadiationPattern::Tabulated(radiant.scaled(1.0 / total)))
}

/// Optical concentrator in front of the photodiode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Concentrator {
    /// No lens: unit gain inside the FoV.
    None,
    /// Ideal non-imaging concentrator, `n²/sin²(Ψ_FoV)` inside the FoV.
    Ideal { refractive_index: f64 },
    /// `n²/sin²(ψ)` with ψ clamped below at 1° so the gain stays finite.
    AsPrinted { refractive_index: f64 },
}

/// Optical filter transmission versus incidence angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FilterGain {
    Unity,
    /// Linearly interpolated `(angle rad, gain)` samples, clamped at the ends.
    Tabulated { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RxOptics {
    fov: f64,
    concentrator: Concentrator,
    filter: FilterGain,
}

const AS_PRINTED_MIN_ANGLE: f64 = PI / 180.0;

impl RxOptics {
    pub fn new(fov: f64, concentrator: Concentrator, filter: FilterGain) -> Result<Self, OpticsError> {
        if !(fov > 0.0 && fov <= FRAC_PI_2 + 1e-12) {
            return Err(OpticsError::InvalidOptics(format!("field of view {fov} rad outside (0, π/2]")));
        }
        if let Concentrator::Ideal { refractive_index: n } | Concentrator::AsPrinted { refractive_index: n } =
            concentrator
        {
            if !(n >= 1.0 && n.is_finite()) {
                return Err(OpticsError::InvalidOptics(format!("refractive index {n} below 1")));
            }
        }
        if let FilterGain::Tabulated { samples } = &filter {
            if samples.is_empty()
                || samples.windows(2).any(|w| !(w[1].0 > w[0].0))
                || samples.iter().any(|s| !(s.1 >= 0.0 && s.1.is_finite()))
            {
                return Err(OpticsError::InvalidOptics(
                    "filter samples need increasing angles and non-negative gains".into(),
                ));
            }
        }
        Ok(Self {
            fov,
            concentrator,
            filter,
        })
    }

    /// Lens-free receiver with unit filter gain.
    pub fn plain(fov: f64) -> Result<Self, OpticsError> {
        Self::new(fov, Concentrator::None, FilterGain::Unity)
    }

    pub fn fov(&self) -> f64 {
        self.fov
    }

    pub fn concentrator(&self) -> Concentrator {
        self.concentrator
    }

    /// 1 when `0 ≤ ψ ≤ Ψ_FoV`, else 0.
    pub fn visibility(&self, psi: f64) -> f64 {
        if (0.0..=self.fov).contains(&psi) {
            1.0
        } else {
            0.0
        }
    }

    pub fn concentrator_gain(&self, psi: f64) -> f64 {
        if self.visibility(psi) == 0.0 {
            return 0.0;
        }
        match self.concentrator {
            Concentrator::None => 1.0,
            Concentrator::Ideal { refractive_index: n } => n * n / self.fov.sin().powi(2),
            Concentrator::AsPrinted { refractive_index: n } => {
                n * n / psi.max(AS_PRINTED_MIN_ANGLE).sin().powi(2)
            }
        }
    }

    pub fn filter_gain(&self, psi: f64) -> f64 {
        match &self.filter {
            FilterGain::Unity => 1.0,
            FilterGain::Tabulated { samples } => {
                let k = samples.partition_point(|s| s.0 <= psi);
                if k == 0 {
                    samples[0].1
                } else if k == samples.len() {
                    samples[k - 1].1
                } else {
                    let (a0, g0) = samples[k - 1];
                    let (a1, g1) = samples[k];
                    g0 + (g1 - g0) * (psi - a0) / (a1 - a0)
                }
            }
        }
    }

    /// Product `G·T·V` at incidence angle ψ.
    pub fn receive_gain(&self, psi: f64) -> f64 {
        let v = self.visibility(psi);
        if v == 0.0 {
            return 0.0;
        }
        self.concentrator_gain(psi) * self.filter_gain(psi) * v
    }
}

/// Diffuse (Lambertian) re-emission `cos(ψ)/π`, 1/sr.
pub fn diffuse_reflection(psi: f64) -> Result<f64, OpticsError> {
    if !(0.0..=FRAC_PI_2).contains(&psi) {
        return Err(OpticsError::OutOfRange(psi));
    }
    Ok(psi.cos().max(0.0) / PI)
}

/// Sampled curve over wavelength in nm, linearly interpolated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    wavelengths: Vec<f64>,
    values: Vec<f64>,
}

impl SpectralCurve {
    pub fn new(wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self, OpticsError> {
        if wavelengths.len() != values.len() {
            return Err(OpticsError::InvalidCurve("column lengths differ".into()));
        }
        if wavelengths.len() < 2 {
            return Err(OpticsError::InvalidCurve("at least 2 samples required".into()));
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) || wavelengths.iter().any(|w| !w.is_finite()) {
            return Err(OpticsError::InvalidCurve("wavelengths must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(OpticsError::InvalidCurve("values must be finite and non-negative".into()));
        }
        Ok(Self { wavelengths, values })
    }

    /// Like [`SpectralCurve::new`] but also requires values in `[0, 1]`.
    pub fn reflectance(wavelengths: Vec<f64>, values: Vec<f64>) -> Result<Self, OpticsError> {
        if values.iter().any(|v| *v > 1.0) {
            return Err(OpticsError::InvalidCurve("reflectance above 1".into()));
        }
        Self::new(wavelengths, values)
    }

    /// Parse a two-column `wavelength_nm,value` table with a header row.
    pub fn from_csv_str(text: &str) -> Result<Self, OpticsError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let (mut wl, mut val) = (Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec.map_err(|e| OpticsError::InvalidCurve(e.to_string()))?;
            if rec.len() != 2 {
                return Err(OpticsError::InvalidCurve(format!("expected 2 columns, got {}", rec.len())));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| OpticsError::InvalidCurve(format!("bad number {s:?}: {e}")))
            };
            wl.push(parse(&rec[0])?);
            val.push(parse(&rec[1])?);
        }
        Self::new(wl, val)
    }

    /// Uniform density over `[lo, hi]`, integrating to 1.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self, OpticsError> {
        Self::new(vec![lo, hi], vec![1.0 / (hi - lo); 2])
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn range(&self) -> (f64, f64) {
        (self.wavelengths[0], self.wavelengths[self.wavelengths.len() - 1])
    }

    /// Linear interpolation; `None` outside the sampled range.
    pub fn value_at(&self, wavelength: f64) -> Option<f64> {
        let (k, u) = bracket(&self.wavelengths, wavelength)?;
        Some(self.values[k] + u * (self.values[k + 1] - self.values[k]))
    }

    /// Trapezoidal integral over the sampled range.
    pub fn integral(&self) -> f64 {
        self.wavelengths
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(w, v)| 0.5 * (w[1] - w[0]) * (v[0] + v[1]))
            .sum()
    }

    /// Rescaled copy integrating to 1.
    pub fn normalized(&self) -> Result<Self, OpticsError> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(OpticsError::InvalidCurve("curve integrates to zero".into()));
        }
        Ok(Self {
            wavelengths: self.wavelengths.clone(),
            values: self.values.iter().map(|v| v / total).collect(),
        })
    }
}

/// Tolerance on the source spectrum normalization.
pub const PSD_NORMALIZATION_TOL: f64 = 1e-6;

/// `Γ = ∫ Φ(λ) ρ(λ) dλ` by the trapezoidal rule on the union of both grids
/// over the support of `psd`.
pub fn effective_reflectance(psd: &SpectralCurve, refl: &SpectralCurve) -> Result<f64, OpticsError> {
    let total = psd.integral();
    if (total - 1.0).abs() > PSD_NORMALIZATION_TOL {
        return Err(OpticsError::NotNormalized(total));
    }
    let (lo, hi) = psd.range();
    let (rlo, rhi) = refl.range();
    if rlo > lo || rhi < hi {
        return Err(OpticsError::DomainMismatch {
            psd_lo: lo,
            psd_hi: hi,
            refl_lo: rlo,
            refl_hi: rhi,
        });
    }
    let mut grid: Vec<f64> = psd
        .wavelengths
        .iter()
        .copied()
        .chain(refl.wavelengths.iter().copied().filter(|w| *w > lo && *w < hi))
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let f = |w: f64| psd.value_at(w).unwrap_or(0.0) * refl.value_at(w).unwrap_or(0.0);
    Ok(grid
        .windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (f(w[0]) + f(w[1])))
        .sum())
}

/// Emission spectrum of a source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SourceSpectrum {
    /// Normalized power spectral density.
    Continuous(SpectralCurve),
    /// All power at one wavelength (nm); `Γ` reduces to `ρ(λ₀)`.
    Monochromatic(f64),
}

impl SourceSpectrum {
    pub fn effective_reflectance(&self, refl: &SpectralCurve) -> Result<f64, OpticsError> {
        match self {
            Self::Continuous(psd) => effective_reflectance(psd, refl),
            Self::Monochromatic(w) => {
                let (lo, hi) = refl.range();
                refl.value_at(*w).ok_or(OpticsError::DomainMismatch {
                    psd_lo: *w,
                    psd_hi: *w,
                    refl_lo: lo,
                    refl_hi: hi,
                })
            }
        }
    }
}

/// Bundled LED emission spectra (synthetic representative shapes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedSpectrum {
    White,
    Red,
    Green,
    Blue,
}

impl LedSpectrum {
    pub fn curve(self) -> &'static SpectralCurve {
        static CURVES: OnceLock<[SpectralCurve; 4]> = OnceLock::new();
        let curves = CURVES.get_or_init(|| {
            let load = |text: &str| {
                SpectralCurve::from_csv_str(text)
                    .and_then(|c| c.normalized())
                    .expect("bundled LED spectrum is valid")
            };
            [
                load(include_str!("../data/led_white.csv")),
                load(include_str!("../data/led_red.csv")),
                load(include_str!("../data/led_green.csv")),
                load(include_str!("../data/led_blue.csv")),
            ]
        });
        &curves[self as usize]
    }
}

/// Bundled wall/furniture materials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Material {
    Floor,
    PineWood,
    Plaster,
    PlateGlass,
}

impl Material {
    pub const ALL: [Material; 4] = [Self::Floor, Self::PineWood, Self::Plaster, Self::PlateGlass];

    pub fn reflectance(self) -> &'static SpectralCurve {
        static CURVES: OnceLock<[SpectralCurve; 4]> = OnceLock::new();
        let curves = CURVES.get_or_init(|| {
            let load = |text: &str| {
                let c = SpectralCurve::from_csv_str(text).expect("bundled reflectance is valid");
                SpectralCurve::reflectance(c.wavelengths, c.values).expect("bundled reflectance in [0, 1]")
            };
            [
                load(include_str!("../data/material_floor.csv")),
                load(include_str!("../data/material_pine_wood.csv")),
                load(include_str!("../data/material_plaster.csv")),
                load(include_str!("../data/material_plate_glass.csv")),
            ]
        });
        &curves[self as usize]
    }
}

/// Default material selection weights (floor, pine wood, plaster, plate glass).
pub const DEFAULT_MATERIAL_WEIGHTS: [f64; 4] = [0.3, 0.2, 0.4, 0.1];

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn lambertian_values() {
        assert!((lambertian_intensity(1.0, 0.0, 0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(lambertian_intensity(3.0, FRAC_PI_2, 0.2).unwrap() < 1e-40);
        let v = lambertian_intensity(2.0, FRAC_PI_4, 0.0).unwrap();
        assert!((v - 0.238_732_414_637_843).abs() < 1e-12, "{v}");
        // behind the emitter
        assert_eq!(lambertian_intensity(1.0, 0.0, PI).unwrap(), 0.0);
        assert_eq!(lambertian_intensity(-0.5, 0.0, 0.0), Err(OpticsError::NegativeOrder(-0.5)));
        // azimuths in [0, 2π) just below 2π are in front
        assert!(lambertian_intensity(1.0, 0.0, TAU - 0.1).unwrap() > 0.0);
    }

    #[test]
    fn concentrator_and_visibility() {
        let o = RxOptics::new(PI / 6.0, Concentrator::Ideal { refractive_index: 1.5 }, FilterGain::Unity).unwrap();
        assert!((o.concentrator_gain(PI / 12.0) - 9.0).abs() < 1e-12);
        assert_eq!(o.concentrator_gain(PI / 5.0), 0.0);
        let plain = RxOptics::plain(PI / 6.0).unwrap();
        assert_eq!(plain.concentrator_gain(0.1), 1.0);
        assert_eq!(plain.visibility(0.0), 1.0);
        assert_eq!(plain.visibility(PI / 6.0), 1.0);
        assert_eq!(plain.visibility(PI / 6.0 + 1e-6), 0.0);
        let printed =
            RxOptics::new(FRAC_PI_2, Concentrator::AsPrinted { refractive_index: 1.0 }, FilterGain::Unity).unwrap();
        assert!(printed.concentrator_gain(0.0).is_finite());
        assert!(RxOptics::plain(0.0).is_err());
        assert!(RxOptics::new(1.0, Concentrator::Ideal { refractive_index: 0.9 }, FilterGain::Unity).is_err());
    }

    #[test]
    fn tabulated_filter_interpolates() {
        let o = RxOptics::new(
            FRAC_PI_2,
            Concentrator::None,
            FilterGain::Tabulated {
                samples: vec![(0.0, 1.0), (1.0, 0.5)],
            },
        )
        .unwrap();
        assert!((o.filter_gain(0.5) - 0.75).abs() < 1e-15);
        assert_eq!(o.filter_gain(1.4), 0.5);
    }

    #[test]
    fn diffuse_reflection_values() {
        assert!((diffuse_reflection(0.0).unwrap() - 1.0 / PI).abs() < 1e-15);
        assert!(diffuse_reflection(FRAC_PI_2).unwrap().abs() < 1e-16);
        assert!((diffuse_reflection(PI / 3.0).unwrap() - 1.0 / TAU).abs() < 1e-15);
        assert!(diffuse_reflection(2.0).is_err());
    }

    #[test]
    fn effective_reflectance_cases() {
        let psd = SpectralCurve::uniform(380.0, 780.0).unwrap();
        let half = SpectralCurve::new(vec![300.0, 900.0], vec![0.5, 0.5]).unwrap();
        assert!((effective_reflectance(&psd, &half).unwrap() - 0.5).abs() < 1e-15);
        let ramp = SpectralCurve::new(vec![380.0, 780.0], vec![0.0, 1.0]).unwrap();
        assert!((effective_reflectance(&psd, &ramp).unwrap() - 0.5).abs() < 1e-15);
        let unnorm = SpectralCurve::new(vec![380.0, 780.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(effective_reflectance(&unnorm, &half), Err(OpticsError::NotNormalized(_))));
        let short = SpectralCurve::new(vec![400.0, 700.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(effective_reflectance(&psd, &short), Err(OpticsError::DomainMismatch { .. })));
    }

    #[test]
    fn bundled_spectra_load() {
        for led in [LedSpectrum::White, LedSpectrum::Red, LedSpectrum::Green, LedSpectrum::Blue] {
            let c = led.curve();
            assert!((c.integral() - 1.0).abs() < 1e-12);
            assert_eq!(c.range(), (380.0, 780.0));
            for m in Material::ALL {
                let g = effective_reflectance(c, m.reflectance()).unwrap();
                assert!((0.0..=1.0).contains(&g));
            }
        }
        let mono = SourceSpectrum::Monochromatic(445.0);
        let g = mono.effective_reflectance(Material::Plaster.reflectance()).unwrap();
        assert_eq!(Some(g), Material::Plaster.reflectance().value_at(445.0));
    }

    #[test]
    fn pattern_csv_parse() {
        let text = "elevation_deg,azimuth_deg,intensity\n-90,-90,0\n-90,90,0\n90,-90,0\n90,90,0\n0,-90,1\n0,90,1\n";
        let p = TabulatedPattern::from_csv_str(text).unwrap();
        assert!((p.intensity(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((p.intensity(FRAC_PI_4, 0.0) - 0.5).abs() < 1e-15);
        assert_eq!(p.intensity(0.0, PI), 0.0);
        let missing = "elevation_deg,azimuth_deg,intensity\n0,0,1\n0,10,1\n10,0,1\n";
        assert!(TabulatedPattern::from_csv_str(missing).is_err());
    }

    #[test]
    fn luminous_normalization() {
        let grid = TabulatedPattern::sample(1f64.to_radians(), |_, _| 7.0).unwrap();
        let p = pattern_from_luminous(grid.clone(), 300.0).unwrap();
        // constant over the hemisphere of solid angle 2π
        assert!((p.intensity(0.3, 0.2) - 1.0 / TAU).abs() < 1e-3);
        let q = pattern_from_luminous(grid.clone(), 600.0).unwrap();
        assert!((p.intensity(0.3, 0.2) - q.intensity(0.3, 0.2)).abs() < 1e-15);
        let zero = TabulatedPattern::sample(1f64.to_radians(), |_, _| 0.0).unwrap();
        assert_eq!(pattern_from_luminous(zero, 1.0), Err(OpticsError::EmptyPattern));
        assert!(pattern_from_luminous(grid, 0.0).is_err());
    }

    #[test]
    fn tabulated_lambertian_matches_closed_form() {
        let grid =
            TabulatedPattern::sample(0.5f64.to_radians(), |el, az| lambertian_unchecked(1.0, el, az) * 250.0)
                .unwrap();
        let p = pattern_from_luminous(grid, 250.0).unwrap();
        for &(el, az) in &[(0.0, 0.0), (0.3, 0.1), (-0.7, 1.0), (1.2, -0.4), (0.05, TAU - 0.3)] {
            let want = lambertian_unchecked(1.0, el, az);
            assert!((p.intensity(el, az) - want).abs() < 1e-3, "({el}, {az})");
        }
    }
}
