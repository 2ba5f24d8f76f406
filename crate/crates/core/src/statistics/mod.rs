//! Channel statistics: transfer function, DC gain and received power, 3-dB
//! bandwidth, RMS delay spread, path loss with close-in fitting, and
//! ensemble correlation functions.

use std::f64::consts::TAU;

use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::channel::{ChannelMatrix, Cir};
use crate::scene::LedArray;

pub mod correlation;
pub mod ensemble;

pub use correlation::{
    acf, ccf, fcf, significant_differences, stfcf, CorrelationSeries, LagPoint, Reduction, SplitTerms, SubChannel,
};
pub use ensemble::{Ensemble, RunSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("impulse response has no taps")]
    EmptyCir,
    #[error("impulse response has zero total power")]
    ZeroGain,
    #[error("powers must be positive (transmit {transmit}, receive {receive})")]
    NonPositivePower { transmit: f64, receive: f64 },
    #[error("path-loss fit needs at least two distinct distances")]
    DegenerateFit,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("ensemble runs use different scenario parameters")]
    ConfigMismatch,
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("simulation failed: {0}")]
    Simulation(String),
}

/// Accumulator with Neumaier compensation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Order-fixed compensated sum of a sequence.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::default();
    for x in xs {
        acc.add(x);
    }
    acc.value()
}

/// Uniform frequency grid, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    start: f64,
    step: f64,
    len: usize,
}

impl FrequencyGrid {
    /// `points` samples from `start` to `end` inclusive.
    pub fn new(start: f64, end: f64, points: usize) -> Result<Self, StatsError> {
        if points < 2 || !(end > start) || start < 0.0 || !end.is_finite() {
            return Err(StatsError::InvalidGrid(format!(
                "need 0 ≤ start < end and at least 2 points (got {start}..{end}, {points})"
            )));
        }
        Ok(Self {
            start,
            step: (end - start) / (points - 1) as f64,
            len: points,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.start + self.step * k as f64
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.frequency(k)).collect()
    }
}

/// `Σ P·exp(-j2πfτ)` at a single frequency.
pub fn transfer_at(cir: &Cir, f: f64) -> Complex64 {
    let mut re = CompensatedSum::default();
    let mut im = CompensatedSum::default();
    for tap in &cir.taps {
        let (s, c) = (-TAU * f * tap.delay).sin_cos();
        re.add(tap.power * c);
        im.add(tap.power * s);
    }
    Complex64::new(re.value(), im.value())
}

/// Channel transfer function on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Ctf {
    grid: FrequencyGrid,
    values: Vec<Complex64>,
    cir: Cir,
}

/// Phasor steps between exact re-evaluations in [`ctf`].
const REANCHOR_EVERY: usize = 64;

pub fn ctf(cir: &Cir, grid: &FrequencyGrid) -> Result<Ctf, StatsError> {
    if cir.taps.is_empty() {
        return Err(StatsError::EmptyCir);
    }
    let mut values = vec![Complex64::new(0.0, 0.0); grid.len];
    for tap in &cir.taps {
        let step = Complex64::from_polar(1.0, -TAU * grid.step * tap.delay);
        let mut z = Complex64::new(0.0, 0.0);
        for (k, v) in values.iter_mut().enumerate() {
            if k % REANCHOR_EVERY == 0 {
                z = Complex64::from_polar(1.0, -TAU * grid.frequency(k) * tap.delay);
            } else {
                z *= step;
            }
            *v += z * tap.power;
        }
    }
    Ok(Ctf {
        grid: *grid,
        values,
        cir: cir.clone(),
    })
}

impl Ctf {
    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Exact evaluation at any frequency.
    pub fn value_at(&self, f: f64) -> Complex64 {
        transfer_at(&self.cir, f)
    }
}

/// Sum of tap powers.
pub fn dc_gain(cir: &Cir) -> f64 {
    compensated_sum(cir.taps.iter().map(|t| t.power))
}

/// Received powers `P_T·H(0)` per sub-channel and their sum per PD.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedPower {
    /// Indexed like the channel matrix, `(row, col, pd)` row-major.
    pub per_link: Vec<f64>,
    pub per_pd: Vec<f64>,
}

pub fn received_power(matrix: &ChannelMatrix, array: &LedArray) -> ReceivedPower {
    let (rows, cols, pds) = matrix.dims();
    let mut per_link = Vec::with_capacity(rows * cols * pds);
    let mut per_pd = vec![CompensatedSum::default(); pds];
    for i in 0..rows {
        for j in 0..cols {
            for (p, acc) in per_pd.iter_mut().enumerate() {
                let v = array.power(i, j) * dc_gain(matrix.get(i, j, p));
                per_link.push(v);
                acc.add(v);
            }
        }
    }
    ReceivedPower {
        per_link,
        per_pd: per_pd.iter().map(|a| a.value()).collect(),
    }
}

/// Bisection stops once the bracket is this small relative to its upper end.
const BANDWIDTH_REL_TOL: f64 = 1e-9;

/// Smallest frequency where `|H(f)|² ≤ 0.5·|H(0)|²`, or `None` if the grid
/// never drops that low.
pub fn bandwidth_3db(ctf: &Ctf) -> Result<Option<f64>, StatsError> {
    let h0 = dc_gain(&ctf.cir);
    if h0 <= 0.0 {
        return Err(StatsError::ZeroGain);
    }
    let half = 0.5 * h0 * h0;
    let Some(k) = ctf.values.iter().position(|v| v.norm_sqr() <= half) else {
        return Ok(None);
    };
    let hi_f = ctf.grid.frequency(k);
    if k == 0 {
        return Ok(Some(hi_f));
    }
    let (mut lo, mut hi) = (ctf.grid.frequency(k - 1), hi_f);
    for _ in 0..200 {
        if hi - lo <= BANDWIDTH_REL_TOL * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if ctf.value_at(mid).norm_sqr() <= half {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Power-weighted standard deviation of the tap delays.
pub fn rms_delay_spread(cir: &Cir) -> Result<f64, StatsError> {
    let total = dc_gain(cir);
    if !(total > 0.0) {
        return Err(StatsError::ZeroGain);
    }
    let mean = compensated_sum(cir.taps.iter().map(|t| t.power * t.delay)) / total;
    let var = compensated_sum(cir.taps.iter().map(|t| {
        let d = t.delay - mean;
        t.power * d * d
    })) / total;
    Ok(var.max(0.0).sqrt())
}

/// `10·log10(P_T/P_R)` in dB.
pub fn path_loss(transmit: f64, receive: f64) -> Result<f64, StatsError> {
    if !(transmit > 0.0 && receive > 0.0) {
        return Err(StatsError::NonPositivePower { transmit, receive });
    }
    Ok(10.0 * (transmit / receive).log10())
}

/// Close-in reference-distance model fitted by least squares.
#[derive(Debug, Clone, PartialEq)]
pub struct PathLossFit {
    /// (distance m, path loss dB)
    pub samples: Vec<(f64, f64)>,
    pub reference_distance: f64,
    /// PL(d₀), dB
    pub reference_loss: f64,
    pub exponent: f64,
    /// Shadowing residuals, dB, in sample order.
    pub residuals: Vec<f64>,
}

impl PathLossFit {
    pub fn predict(&self, distance: f64) -> f64 {
        self.reference_loss + 10.0 * self.exponent * (distance / self.reference_distance).log10()
    }
}

/// Fit `PL(d) = PL(d₀) + 10γ·log10(d/d₀)`.
pub fn fit_ci(samples: &[(f64, f64)], reference_distance: f64) -> Result<PathLossFit, StatsError> {
    let xs: Vec<f64> = samples
        .iter()
        .map(|(d, _)| 10.0 * (d / reference_distance).log10())
        .collect();
    let n = samples.len() as f64;
    if samples.len() < 2 {
        return Err(StatsError::DegenerateFit);
    }
    let mx = compensated_sum(xs.iter().copied()) / n;
    let my = compensated_sum(samples.iter().map(|s| s.1)) / n;
    let sxx = compensated_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(StatsError::DegenerateFit);
    }
    let sxy = compensated_sum(xs.iter().zip(samples).map(|(x, s)| (x - mx) * (s.1 - my)));
    let exponent = sxy / sxx;
    let reference_loss = my - exponent * mx;
    let residuals = xs
        .iter()
        .zip(samples)
        .map(|(x, s)| s.1 - (reference_loss + exponent * x))
        .collect();
    Ok(PathLossFit {
        samples: samples.to_vec(),
        reference_distance,
        reference_loss,
        exponent,
        residuals,
    })
}

/// Minimum residual count for [`shadowing_stats`].
pub const MIN_SHADOWING_SAMPLES: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ShadowingStats {
    pub mean: f64,
    /// Sample standard deviation (n-1 denominator), dB.
    pub std_dev: f64,
    /// Sorted residuals with their empirical CDF values.
    pub ecdf: Vec<(f64, f64)>,
    /// Kolmogorov-Smirnov distance to the fitted normal.
    pub ks_distance: f64,
    /// Asymptotic 5% critical value for this sample size.
    pub ks_critical: f64,
}

impl ShadowingStats {
    pub fn is_normal_at_5pct(&self) -> bool {
        self.ks_distance <= self.ks_critical
    }
}

/// Asymptotic two-sided 5% Kolmogorov-Smirnov critical value.
pub fn ks_critical_5pct(n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    1.358 / (sn + 0.12 + 0.11 / sn)
}

pub fn shadowing_stats(fit: &PathLossFit) -> Result<ShadowingStats, StatsError> {
    let r = &fit.residuals;
    if r.len() < MIN_SHADOWING_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_SHADOWING_SAMPLES,
            got: r.len(),
        });
    }
    let n = r.len() as f64;
    let mean = compensated_sum(r.iter().copied()) / n;
    let var = compensated_sum(r.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0);
    let std_dev = var.max(0.0).sqrt();
    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let ecdf: Vec<(f64, f64)> = sorted
        .iter()
        .enumerate()
        .map(|(k, x)| (*x, (k + 1) as f64 / n))
        .collect();
    let ks_distance = if std_dev > 0.0 {
        let normal = Normal::new(mean, std_dev).expect("positive deviation");
        sorted
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let c = normal.cdf(*x);
                (c - k as f64 / n).abs().max(((k + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    } else {
        // a point mass matches the degenerate fitted distribution
        0.0
    };
    Ok(ShadowingStats {
        mean,
        std_dev,
        ecdf,
        ks_distance,
        ks_critical: ks_critical_5pct(r.len()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{RayTap, TapKind};

    fn cir(taps: &[(f64, f64)]) -> Cir {
        Cir::new(
            0,
            0,
            0,
            0.0,
            taps.iter()
                .map(|&(power, delay)| RayTap {
                    power,
                    delay,
                    kind: TapKind::LineOfSight,
                })
                .collect(),
        )
    }

    #[test]
    fn single_tap_ctf_is_flat() {
        let c = cir(&[(0.3, 7e-9)]);
        let g = FrequencyGrid::new(0.0, 2e8, 513).unwrap();
        let h = ctf(&c, &g).unwrap();
        for v in h.values() {
            assert!((v.norm() - 0.3).abs() < 1e-14);
        }
        assert_eq!(bandwidth_3db(&h).unwrap(), None);
        assert_eq!(ctf(&cir(&[]), &g), Err(StatsError::EmptyCir));
    }

    #[test]
    fn two_tap_null_and_bandwidth() {
        let dt = 5e-9;
        let c = cir(&[(1.0, 1e-9), (1.0, 1e-9 + dt)]);
        let h = |f: f64| transfer_at(&c, f).norm();
        assert!(h(1.0 / (2.0 * dt)) < 1e-12);
        let g = FrequencyGrid::new(0.0, 2e8, 2048).unwrap();
        let bw = bandwidth_3db(&ctf(&c, &g).unwrap()).unwrap().unwrap();
        let want = 1.0 / (4.0 * dt);
        assert!((bw - want).abs() < 1e-3 * want, "{bw} vs {want}");
    }

    #[test]
    fn recurrence_matches_direct_evaluation() {
        let c = cir(&[(0.2, 3.3e-9), (0.7, 11.9e-9), (0.05, 40.1e-9)]);
        let g = FrequencyGrid::new(0.0, 2e8, 2048).unwrap();
        let h = ctf(&c, &g).unwrap();
        for k in [0, 1, 63, 64, 65, 1000, 2047] {
            let d = h.values()[k] - transfer_at(&c, g.frequency(k));
            assert!(d.norm() < 1e-13);
        }
        assert!((h.values()[0].re - dc_gain(&c)).abs() < 1e-15);
    }

    #[test]
    fn rms_cases() {
        assert_eq!(rms_delay_spread(&cir(&[(1.0, 5e-9)])).unwrap(), 0.0);
        let r = rms_delay_spread(&cir(&[(2.0, 1e-9), (2.0, 3e-9)])).unwrap();
        assert!((r - 1e-9).abs() < 1e-21);
        assert_eq!(rms_delay_spread(&cir(&[])), Err(StatsError::ZeroGain));
    }

    #[test]
    fn path_loss_cases() {
        assert_eq!(path_loss(1.0, 1.0).unwrap(), 0.0);
        assert!((path_loss(1.0, 0.01).unwrap() - 20.0).abs() < 1e-12);
        assert!(path_loss(0.0, 1.0).is_err());
        assert_eq!(fit_ci(&[(2.0, 1.0), (2.0, 3.0)], 1.0), Err(StatsError::DegenerateFit));
    }

    #[test]
    fn constant_residuals() {
        let fit = PathLossFit {
            samples: vec![],
            reference_distance: 1.0,
            reference_loss: 0.0,
            exponent: 0.0,
            residuals: vec![0.5; 40],
        };
        let s = shadowing_stats(&fit).unwrap();
        assert_eq!(s.std_dev, 0.0);
        let short = PathLossFit {
            residuals: vec![0.0; 10],
            ..fit
        };
        assert!(matches!(shadowing_stats(&short), Err(StatsError::TooFewSamples { .. })));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(xs), 2.0);
    }
}
