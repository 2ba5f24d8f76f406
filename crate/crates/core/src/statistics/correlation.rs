//! Space-time-frequency correlation of transfer functions, estimated by
//! ensemble averaging, with optional LoS/NLoS decomposition.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;

use super::{CompensatedSum, Ensemble, StatsError};
use crate::channel::{cir_snapshot_masked, Cir, Components};
use crate::scene::Scene;

/// One `(row, col, pd)` link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubChannel {
    pub row: usize,
    pub col: usize,
    pub pd: usize,
}

impl SubChannel {
    pub const fn new(row: usize, col: usize, pd: usize) -> Self {
        Self { row, col, pd }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Stfcf,
    Acf,
    Ccf,
    Fcf,
}

/// Target of one correlation lag: the other sub-channel and the time and
/// frequency offsets from the anchor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagPoint {
    pub sub: SubChannel,
    pub dt: f64,
    pub df: f64,
}

/// LoS-LoS, survival-weighted NLoS-NLoS and LoS-NLoS cross terms.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitTerms {
    pub los: Vec<Complex64>,
    pub nlos: Vec<Complex64>,
    pub cross: Vec<Complex64>,
    /// Survival factor applied to each NLoS entry.
    pub survival: Vec<f64>,
}

impl SplitTerms {
    /// LoS plus NLoS terms, without the cross terms.
    pub fn semi_analytical(&self) -> Vec<Complex64> {
        self.los.iter().zip(&self.nlos).map(|(a, b)| a + b).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub reduction: Reduction,
    pub anchor: SubChannel,
    pub anchor_time: f64,
    pub anchor_freq: f64,
    pub ensemble_size: usize,
    pub lags: Vec<LagPoint>,
    /// `E{H(anchor)·H*(lag)}`
    pub raw: Vec<Complex64>,
    pub raw_std_error: Vec<f64>,
    /// `raw` divided by the anchor's zero-lag value `E{|H(anchor)|²}`.
    pub normalized: Vec<Complex64>,
    pub normalized_std_error: Vec<f64>,
    pub split: Option<SplitTerms>,
}

/// Per-run transfer values split into LoS and NLoS parts.
#[derive(Debug, Clone, Copy, Default)]
struct Parts {
    los: Complex64,
    nlos: Complex64,
}

impl Parts {
    fn total(&self) -> Complex64 {
        self.los + self.nlos
    }
}

fn parts(cir: &Cir, f: f64) -> Parts {
    let mut los = ComplexSum::default();
    let mut nlos = ComplexSum::default();
    for t in &cir.taps {
        let z = Complex64::from_polar(t.power, -TAU * f * t.delay);
        if t.kind.is_los() {
            los.add(z);
        } else {
            nlos.add(z);
        }
    }
    Parts {
        los: los.total(),
        nlos: nlos.total(),
    }
}

struct RunValues {
    anchor: Parts,
    lagged: Vec<Parts>,
    /// NLoS at each lag restricted to clusters the anchor element observes.
    lagged_anchor_clusters: Vec<Complex64>,
}

fn evaluate_run(
    scene: &Scene,
    anchor: SubChannel,
    t: f64,
    f: f64,
    lags: &[LagPoint],
    with_split: bool,
) -> Result<RunValues, StatsError> {
    // one tap list per (time, sub-channel, mask) triple
    let mut cache: BTreeMap<(u64, SubChannel, bool), Cir> = BTreeMap::new();
    let mut get = |time: f64, sub: SubChannel, anchor_mask: bool| -> Result<Cir, StatsError> {
        let key = (time.to_bits(), sub, anchor_mask);
        if let Some(c) = cache.get(&key) {
            return Ok(c.clone());
        }
        let snap = scene.positions_at(time);
        let mask = if anchor_mask {
            (anchor.row, anchor.col)
        } else {
            (sub.row, sub.col)
        };
        let cir = cir_snapshot_masked(sub.row, sub.col, sub.pd, &snap, Components::All, mask)?;
        cache.insert(key, cir.clone());
        Ok(cir)
    };
    let anchor_parts = parts(&get(t, anchor, false)?, f);
    let mut lagged = Vec::with_capacity(lags.len());
    let mut lagged_anchor_clusters = Vec::with_capacity(lags.len());
    for lag in lags {
        let time = t + lag.dt;
        let freq = f + lag.df;
        lagged.push(parts(&get(time, lag.sub, false)?, freq));
        if with_split {
            let same_mask = lag.sub.row == anchor.row && lag.sub.col == anchor.col;
            let cir = get(time, lag.sub, !same_mask)?;
            lagged_anchor_clusters.push(parts(&cir, freq).nlos);
        }
    }
    Ok(RunValues {
        anchor: anchor_parts,
        lagged,
        lagged_anchor_clusters,
    })
}

#[derive(Default, Clone, Copy)]
struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn total(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }

    fn mean(&self, n: f64) -> Complex64 {
        Complex64::new(self.re.value() / n, self.im.value() / n)
    }
}

fn mean_of<I: Iterator<Item = Complex64>>(it: I, n: f64) -> Complex64 {
    let mut s = ComplexSum::default();
    for z in it {
        s.add(z);
    }
    s.mean(n)
}

/// Standard error of the mean of complex samples (NaN for one sample).
fn std_error_of<I: Iterator<Item = Complex64>>(it: I, mean: Complex64, n: f64) -> f64 {
    let mut s = CompensatedSum::default();
    for z in it {
        s.add((z - mean).norm_sqr());
    }
    (s.value() / (n * (n - 1.0))).sqrt()
}

/// General correlation estimate `E{H_anchor(t, f)·H*_lag(t+Δt, f+Δf)}`.
pub fn stfcf(
    ensemble: &Ensemble,
    anchor: SubChannel,
    t: f64,
    f: f64,
    lags: &[LagPoint],
    with_split: bool,
    reduction: Reduction,
) -> Result<CorrelationSeries, StatsError> {
    let runs = ensemble.map(|scene| evaluate_run(scene, anchor, t, f, lags, with_split))?;
    let n = runs.len() as f64;

    let zero_lag: Vec<f64> = runs.iter().map(|r| r.anchor.total().norm_sqr()).collect();
    let r0 = mean_of(zero_lag.iter().map(|&y| Complex64::new(y, 0.0)), n).re;

    let mut raw = Vec::with_capacity(lags.len());
    let mut raw_se = Vec::with_capacity(lags.len());
    let mut normalized = Vec::with_capacity(lags.len());
    let mut normalized_se = Vec::with_capacity(lags.len());
    for k in 0..lags.len() {
        let prod = || runs.iter().map(move |r| r.anchor.total() * r.lagged[k].total().conj());
        let m = mean_of(prod(), n);
        raw.push(m);
        raw_se.push(std_error_of(prod(), m, n));
        let ratio = m / r0;
        normalized.push(ratio);
        // delta method for a ratio of means over the same runs
        let resid = runs
            .iter()
            .zip(&zero_lag)
            .map(|(r, &y)| r.anchor.total() * r.lagged[k].total().conj() - ratio * y);
        normalized_se.push(std_error_of(resid, Complex64::new(0.0, 0.0), n) / r0.abs());
    }

    let split = if with_split {
        let (ph, pv) = ensemble.params().remain_probabilities();
        let mut out = SplitTerms {
            los: Vec::new(),
            nlos: Vec::new(),
            cross: Vec::new(),
            survival: Vec::new(),
        };
        for (k, lag) in lags.iter().enumerate() {
            let di = lag.sub.row.abs_diff(anchor.row) as i32;
            let dj = lag.sub.col.abs_diff(anchor.col) as i32;
            let survival = ph.powi(di) * pv.powi(dj);
            out.los.push(mean_of(runs.iter().map(|r| r.anchor.los * r.lagged[k].los.conj()), n));
            out.nlos.push(
                mean_of(
                    runs.iter().map(|r| r.anchor.nlos * r.lagged_anchor_clusters[k].conj()),
                    n,
                ) * survival,
            );
            out.cross.push(mean_of(
                runs.iter().map(|r| {
                    r.anchor.los * r.lagged[k].nlos.conj() + r.anchor.nlos * r.lagged[k].los.conj()
                }),
                n,
            ));
            out.survival.push(survival);
        }
        Some(out)
    } else {
        None
    };

    Ok(CorrelationSeries {
        reduction,
        anchor,
        anchor_time: t,
        anchor_freq: f,
        ensemble_size: runs.len(),
        lags: lags.to_vec(),
        raw,
        raw_std_error: raw_se,
        normalized,
        normalized_std_error: normalized_se,
        split,
    })
}

/// Temporal autocorrelation of one sub-channel over time lags.
pub fn acf(
    ensemble: &Ensemble,
    sub: SubChannel,
    t: f64,
    f: f64,
    time_lags: &[f64],
    with_split: bool,
) -> Result<CorrelationSeries, StatsError> {
    let lags: Vec<LagPoint> = time_lags.iter().map(|&dt| LagPoint { sub, dt, df: 0.0 }).collect();
    stfcf(ensemble, sub, t, f, &lags, with_split, Reduction::Acf)
}

/// Spatial cross-correlation between an anchor and other sub-channels.
pub fn ccf(
    ensemble: &Ensemble,
    anchor: SubChannel,
    t: f64,
    f: f64,
    others: &[SubChannel],
    with_split: bool,
) -> Result<CorrelationSeries, StatsError> {
    let lags: Vec<LagPoint> = others.iter().map(|&sub| LagPoint { sub, dt: 0.0, df: 0.0 }).collect();
    stfcf(ensemble, anchor, t, f, &lags, with_split, Reduction::Ccf)
}

/// Frequency correlation of one sub-channel over frequency lags.
pub fn fcf(
    ensemble: &Ensemble,
    sub: SubChannel,
    t: f64,
    f: f64,
    freq_lags: &[f64],
    with_split: bool,
) -> Result<CorrelationSeries, StatsError> {
    let lags: Vec<LagPoint> = freq_lags.iter().map(|&df| LagPoint { sub, dt: 0.0, df }).collect();
    stfcf(ensemble, sub, t, f, &lags, with_split, Reduction::Fcf)
}

/// Lag indices where two normalized series differ by more than `k`
/// combined standard errors.
pub fn significant_differences(a: &CorrelationSeries, b: &CorrelationSeries, k: f64) -> Vec<usize> {
    a.normalized
        .iter()
        .zip(&b.normalized)
        .zip(a.normalized_std_error.iter().zip(&b.normalized_std_error))
        .enumerate()
        .filter(|(_, ((x, y), (&sx, &sy)))| (**x - **y).norm() > k * sx.hypot(sy))
        .map(|(i, _)| i)
        .collect()
}
