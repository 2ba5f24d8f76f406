//! Experiment presets: parameter sweeps that run the full scene, channel
//! and statistics pipeline and return result tables.
//!
//! Each preset starts from the caller's [`SimulationConfig`] and overrides
//! only the fields that define the sweep.

use std::f64::consts::LN_2;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::{channel_matrix, cir_snapshot, Cir, Components};
use crate::config::{ConfigError, SimulationConfig, SourceKind};
use crate::optics::{pattern_from_luminous, OpticsError, RadiationPattern, TabulatedPattern};
use crate::rng::StreamSeed;
use crate::scene::{Scene, SceneParams};
use crate::statistics::{
    acf, bandwidth_3db, ccf, ctf, dc_gain, fcf, fit_ci, path_loss, received_power, rms_delay_spread,
    shadowing_stats, transfer_at, CompensatedSum, CorrelationSeries, Ctf, Ensemble, FrequencyGrid, StatsError,
    SubChannel,
};
use crate::table::{Cell, ResultTable};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("unknown experiment {0:?}; known experiments: {list}", list = Experiment::names().join(", "))]
    UnknownExperiment(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("radiation pattern: {0}")]
    Pattern(#[from] OpticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    AcfTime,
    CcfSpace,
    FcfColor,
    PowerVsDistance,
    PowerRotationFov,
    RmsPatterns,
    RmsAdr,
    PlCi,
    BandwidthFov,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Self::AcfTime,
        Self::CcfSpace,
        Self::FcfColor,
        Self::PowerVsDistance,
        Self::PowerRotationFov,
        Self::RmsPatterns,
        Self::RmsAdr,
        Self::PlCi,
        Self::BandwidthFov,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::AcfTime => "acf-time",
            Self::CcfSpace => "ccf-space",
            Self::FcfColor => "fcf-color",
            Self::PowerVsDistance => "power-vs-distance",
            Self::PowerRotationFov => "power-rotation-fov",
            Self::RmsPatterns => "rms-patterns",
            Self::RmsAdr => "rms-adr",
            Self::PlCi => "pl-ci",
            Self::BandwidthFov => "bandwidth-fov",
        }
    }

    pub fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|e| e.name()).collect()
    }

    pub fn run(self, config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
        match self {
            Self::AcfTime => acf_time(config),
            Self::CcfSpace => ccf_space(config),
            Self::FcfColor => fcf_color(config),
            Self::PowerVsDistance => power_vs_distance(config, &DISTANCES_M, &SPACINGS_M),
            Self::PowerRotationFov => power_rotation_fov(config, &ROTATION_FOVS_DEG),
            Self::RmsPatterns => rms_patterns(config),
            Self::RmsAdr => rms_adr(config),
            Self::PlCi => pl_ci(config),
            Self::BandwidthFov => bandwidth_fov(config, &BANDWIDTH_FOVS_DEG),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| ExperimentError::UnknownExperiment(s.to_string()))
    }
}

/// Run the preset called `name`.
pub fn run_experiment(config: &SimulationConfig, name: &str) -> Result<Vec<ResultTable>, ExperimentError> {
    name.parse::<Experiment>()?.run(config)
}

pub const DISTANCES_M: [f64; 6] = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
pub const SPACINGS_M: [f64; 3] = [1.0, 1.5, 2.0];
pub const ROTATION_FOVS_DEG: [f64; 3] = [45.0, 60.0, 90.0];
pub const BANDWIDTH_FOVS_DEG: [f64; 4] = [30.0, 45.0, 60.0, 85.0];
/// Half-power angles of the Gaussian-beam comparison patterns.
pub const NARROW_BEAM_DEG: f64 = 15.0;
pub const MEDIUM_BEAM_DEG: f64 = 30.0;
const BEAM_GRID_STEP_DEG: f64 = 0.5;
const FCF_LAG_COUNT: usize = 101;

fn ensemble(config: &SimulationConfig) -> Result<Ensemble, ExperimentError> {
    Ok(Ensemble::new(config.scene_params()?, config.ensemble.seed, config.ensemble.size))
}

fn ensemble_with(config: &SimulationConfig, params: SceneParams) -> Ensemble {
    Ensemble::new(Arc::new(params), config.ensemble.seed, config.ensemble.size)
}

/// Rotationally symmetric pattern `exp(-ln2·(θ/θ½)²)` about the element
/// normal, normalized to 1 W.
pub fn gaussian_beam(half_power_deg: f64) -> Result<RadiationPattern, OpticsError> {
    if !(half_power_deg > 0.0 && half_power_deg.is_finite()) {
        return Err(OpticsError::InvalidPattern(format!(
            "half-power angle must be positive, got {half_power_deg}"
        )));
    }
    let half = half_power_deg.to_radians();
    let grid = TabulatedPattern::sample(BEAM_GRID_STEP_DEG.to_radians(), |el, az| {
        let off_axis = (el.cos() * az.cos()).clamp(-1.0, 1.0).acos();
        (-LN_2 * (off_axis / half).powi(2)).exp()
    })?;
    pattern_from_luminous(grid, 1.0)
}

/// Receiver moving straight up at 0.5 m/s.
pub fn apply_vertical_motion(config: &mut SimulationConfig) {
    config.receiver.speed_m_s = 0.5;
    config.receiver.motion_azimuth_deg = 0.0;
    config.receiver.motion_elevation_deg = 90.0;
}

/// Cluster and link settings of the bandwidth comparison: one LED, ten
/// clusters on average and a 445 nm source.
pub fn apply_bandwidth_scenario(config: &mut SimulationConfig) {
    config.array.rows = 1;
    config.array.cols = 1;
    config.evolution.birth_rate_per_m = 40.0;
    config.evolution.death_rate_per_m = 4.0;
    config.spectrum.source = SourceKind::Monochromatic;
    config.spectrum.wavelength_nm = 445.0;
    let c = &mut config.clusters;
    c.tx_elevation_mean_deg = 15.0;
    c.tx_azimuth_mean_deg = 60.0;
    c.tx_elevation_std_deg = 45.0;
    c.tx_azimuth_std_deg = 45.5;
    c.rx_elevation_std_deg = 45.0;
    c.rx_azimuth_std_deg = 45.5;
    c.sigma_ds_m = 3.422;
    c.sigma_as_m = 2.691;
    c.sigma_es_m = 3.719;
    c.scatterers_per_cluster = 150;
    config.receiver.distance_m = 2.6345;
}

const CORRELATION_COLUMNS: [(&str, &str); 13] = [
    ("raw_re", "1"),
    ("raw_im", "1"),
    ("raw_std_error", "1"),
    ("normalized_re", "1"),
    ("normalized_im", "1"),
    ("normalized_std_error", "1"),
    ("los_re", "1"),
    ("los_im", "1"),
    ("nlos_re", "1"),
    ("nlos_im", "1"),
    ("cross_re", "1"),
    ("cross_im", "1"),
    ("survival", "1"),
];

fn correlation_table(name: &str, leading: &[(&str, &str)]) -> ResultTable {
    let cols: Vec<(&str, &str)> = leading.iter().chain(CORRELATION_COLUMNS.iter()).copied().collect();
    ResultTable::new(name, &cols)
}

fn correlation_cells(s: &CorrelationSeries, k: usize) -> Vec<Cell> {
    let nan = Complex64::new(f64::NAN, f64::NAN);
    let (los, nlos, cross, survival) = match &s.split {
        Some(sp) => (sp.los[k], sp.nlos[k], sp.cross[k], sp.survival[k]),
        None => (nan, nan, nan, f64::NAN),
    };
    vec![
        s.raw[k].re.into(),
        s.raw[k].im.into(),
        s.raw_std_error[k].into(),
        s.normalized[k].re.into(),
        s.normalized[k].im.into(),
        s.normalized_std_error[k].into(),
        los.re.into(),
        los.im.into(),
        nlos.re.into(),
        nlos.im.into(),
        cross.re.into(),
        cross.im.into(),
        survival.into(),
    ]
}

/// Time lags `0, Δt, …` spanning half the configured time window.
pub fn half_window_lags(config: &SimulationConfig) -> Vec<f64> {
    let n = config.time.samples().len();
    (0..=(n - 1) / 2).map(|k| k as f64 * config.time.step_s).collect()
}

/// Temporal ACF of the first sub-channel for a moving receiver, anchored
/// at the start, middle and end of the time window.
pub fn acf_time(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let mut c = config.clone();
    apply_vertical_motion(&mut c);
    let ens = ensemble(&c)?;
    let times = c.time.samples();
    let anchors = [times[0], times[(times.len() - 1) / 2], times[times.len() - 1]];
    let lags = half_window_lags(&c);
    let sub = SubChannel::new(0, 0, 0);
    let mut table = correlation_table("acf", &[("anchor_time", "s"), ("lag", "s")]);
    for &t in &anchors {
        let s = acf(&ens, sub, t, c.frequency.start_hz, &lags, true)?;
        for (k, &dt) in lags.iter().enumerate() {
            let mut row = vec![t.into(), dt.into()];
            row.extend(correlation_cells(&s, k));
            table.push(row);
        }
    }
    Ok(vec![table])
}

/// Spatial CCF across the array for the configured pattern and a narrow
/// Gaussian beam, anchored at the first and last element.
pub fn ccf_space(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let base = config.scene_params()?;
    let patterns = [
        ("configured", base.array.pattern().clone()),
        ("gaussian-15deg", gaussian_beam(NARROW_BEAM_DEG)?),
    ];
    let (rows, cols) = (config.array.rows, config.array.cols);
    let anchors = [SubChannel::new(0, 0, 0), SubChannel::new(rows - 1, cols - 1, 0)];
    let others: Vec<SubChannel> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| SubChannel::new(i, j, 0)))
        .collect();
    let mut table = correlation_table(
        "ccf",
        &[
            ("pattern", ""),
            ("anchor_row", ""),
            ("anchor_col", ""),
            ("row", ""),
            ("col", ""),
            ("delta_row", ""),
            ("delta_col", ""),
        ],
    );
    for (label, pattern) in patterns {
        let ens = ensemble_with(config, config.scene_params_with_pattern(pattern)?);
        for anchor in anchors {
            let s = ccf(&ens, anchor, config.time.start_s, config.frequency.start_hz, &others, true)?;
            for (k, o) in others.iter().enumerate() {
                let mut row: Vec<Cell> = vec![
                    label.into(),
                    anchor.row.into(),
                    anchor.col.into(),
                    o.row.into(),
                    o.col.into(),
                    (o.row as i64 - anchor.row as i64).into(),
                    (o.col as i64 - anchor.col as i64).into(),
                ];
                row.extend(correlation_cells(&s, k));
                table.push(row);
            }
        }
    }
    Ok(vec![table])
}

/// Evenly spaced frequency lags from 0 across the configured band.
pub fn band_lags(grid: &FrequencyGrid, count: usize) -> Vec<f64> {
    let span = grid.frequency(grid.len() - 1) - grid.frequency(0);
    (0..count).map(|k| span * k as f64 / (count - 1) as f64).collect()
}

/// FCF of the first sub-channel for red, green and blue sources, each with
/// its own cluster spread.
pub fn fcf_color(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let lags = band_lags(&config.frequency_grid()?, FCF_LAG_COUNT);
    let mut table = correlation_table("fcf", &[("source", ""), ("frequency_lag", "Hz")]);
    for (label, source, spread) in [
        ("red", SourceKind::Red, 1.0),
        ("green", SourceKind::Green, 1.1),
        ("blue", SourceKind::Blue, 1.2),
    ] {
        let mut c = config.clone();
        c.spectrum.source = source;
        c.clusters.sigma_ds_m = spread;
        c.clusters.sigma_as_m = spread;
        c.clusters.sigma_es_m = spread;
        let ens = ensemble(&c)?;
        let s = fcf(&ens, SubChannel::new(0, 0, 0), c.time.start_s, c.frequency.start_hz, &lags, true)?;
        for (k, &df) in lags.iter().enumerate() {
            let mut row = vec![label.into(), df.into()];
            row.extend(correlation_cells(&s, k));
            table.push(row);
        }
    }
    Ok(vec![table])
}

/// Ensemble mean and standard error of the total power at the first PD.
pub fn mean_received_power(ens: &Ensemble, t: f64) -> Result<(f64, f64), StatsError> {
    let powers = ens.map(|scene| {
        let m = channel_matrix(scene, t, Components::All)?;
        Ok(received_power(&m, &scene.params().array).per_pd[0])
    })?;
    Ok(mean_and_std_error(&powers))
}

fn mean_and_std_error(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mut s = CompensatedSum::default();
    xs.iter().for_each(|&x| s.add(x));
    let mean = s.value() / n;
    let mut v = CompensatedSum::default();
    xs.iter().for_each(|&x| v.add((x - mean) * (x - mean)));
    (mean, (v.value() / (n * (n - 1.0))).sqrt())
}

/// Total received power against Tx-Rx distance for several element
/// spacings. Every point reuses the same realization seeds.
pub fn power_vs_distance(
    config: &SimulationConfig,
    distances: &[f64],
    spacings: &[f64],
) -> Result<Vec<ResultTable>, ExperimentError> {
    let mut table = ResultTable::new(
        "power_vs_distance",
        &[("spacing", "m"), ("distance", "m"), ("mean_power", "W"), ("std_error", "W")],
    );
    for &delta in spacings {
        for &d in distances {
            let mut c = config.clone();
            c.array.spacing_h_m = delta;
            c.array.spacing_v_m = delta;
            c.receiver.distance_m = d;
            let (mean, se) = mean_received_power(&ensemble(&c)?, c.time.start_s)?;
            table.push(vec![delta.into(), d.into(), mean.into(), se.into()]);
        }
    }
    Ok(vec![table])
}

/// Total received power of one realization while the receiver turns in
/// azimuth at 45°/s, for several fields of view.
pub fn power_rotation_fov(config: &SimulationConfig, fovs_deg: &[f64]) -> Result<Vec<ResultTable>, ExperimentError> {
    let times = config.time.samples();
    let mut table = ResultTable::new("power_rotation", &[("fov", "deg"), ("time", "s"), ("power", "W")]);
    for &fov in fovs_deg {
        let mut c = config.clone();
        c.receiver.azimuth_rate_deg_s = 45.0;
        c.receiver.fov_deg = fov;
        let scene = Scene::generate(c.scene_params()?, StreamSeed::new(c.ensemble.seed, 0)).map_err(StatsError::from)?;
        let powers: Vec<f64> = times
            .par_iter()
            .map(|&t| {
                let m = channel_matrix(&scene, t, Components::All)?;
                Ok(received_power(&m, &scene.params().array).per_pd[0])
            })
            .collect::<Result<_, StatsError>>()?;
        for (&t, p) in times.iter().zip(powers) {
            table.push(vec![fov.into(), t.into(), p.into()]);
        }
    }
    Ok(vec![table])
}

/// Median of the finite-or-infinite values, ignoring NaN.
pub fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rms_or_nan(cir: &Cir) -> Result<f64, StatsError> {
    match rms_delay_spread(cir) {
        Ok(v) => Ok(v),
        Err(StatsError::ZeroGain) => Ok(f64::NAN),
        Err(e) => Err(e),
    }
}

/// NLoS RMS delay spread of the first sub-channel for three patterns.
pub fn rms_patterns(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let base = config.scene_params()?;
    let patterns = [
        ("configured", base.array.pattern().clone()),
        ("gaussian-30deg", gaussian_beam(MEDIUM_BEAM_DEG)?),
        ("gaussian-15deg", gaussian_beam(NARROW_BEAM_DEG)?),
    ];
    let t = config.time.start_s;
    let mut runs = ResultTable::new("rms_patterns", &[("pattern", ""), ("realization", ""), ("rms_delay_spread", "s")]);
    let mut summary = ResultTable::new(
        "rms_patterns_summary",
        &[("pattern", ""), ("median_rms_delay_spread", "s"), ("valid_realizations", "")],
    );
    for (label, pattern) in patterns {
        let ens = ensemble_with(config, config.scene_params_with_pattern(pattern)?);
        let values = ens.map(|scene| {
            let snap = scene.positions_at(t);
            rms_or_nan(&cir_snapshot(0, 0, 0, &snap, Components::NlosOnly)?)
        })?;
        for (r, v) in values.iter().enumerate() {
            runs.push(vec![label.into(), r.into(), (*v).into()]);
        }
        let valid = values.iter().filter(|v| !v.is_nan()).count();
        summary.push(vec![label.into(), median(&values).into(), valid.into()]);
    }
    Ok(vec![runs, summary])
}

/// RMS delay spread of the first LED at each PD of a three-PD receiver.
pub fn rms_adr(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let mut c = config.clone();
    c.receiver.pd_count = 3;
    c.receiver.fov_deg = 60.0;
    c.receiver.inclination_deg = 45.0;
    let ens = ensemble(&c)?;
    let t = c.time.start_s;
    let values = ens.map(|scene| {
        let snap = scene.positions_at(t);
        (0..3)
            .map(|p| rms_or_nan(&cir_snapshot(0, 0, p, &snap, Components::All)?))
            .collect::<Result<Vec<f64>, StatsError>>()
    })?;
    let mut runs = ResultTable::new("rms_adr", &[("pd", ""), ("realization", ""), ("rms_delay_spread", "s")]);
    let mut summary = ResultTable::new(
        "rms_adr_summary",
        &[("pd", ""), ("median_rms_delay_spread", "s"), ("valid_realizations", "")],
    );
    for p in 0..3 {
        let col: Vec<f64> = values.iter().map(|v| v[p]).collect();
        for (r, v) in col.iter().enumerate() {
            runs.push(vec![p.into(), r.into(), (*v).into()]);
        }
        let valid = col.iter().filter(|v| !v.is_nan()).count();
        summary.push(vec![p.into(), median(&col).into(), valid.into()]);
    }
    Ok(vec![runs, summary])
}

/// Distances of the path-loss sweep: 1 m to 6 m in 0.1 m steps.
pub fn pl_distances() -> Vec<f64> {
    (0..=50).map(|k| 1.0 + 0.1 * k as f64).collect()
}

/// Path loss of the first sub-channel at each distance, one independent
/// realization per distance.
pub fn path_loss_samples(config: &SimulationConfig, distances: &[f64]) -> Result<Vec<(f64, f64)>, ExperimentError> {
    let params: Vec<Arc<SceneParams>> = distances
        .iter()
        .map(|&d| {
            let mut c = config.clone();
            c.receiver.distance_m = d;
            c.scene_params()
        })
        .collect::<Result<_, _>>()?;
    let t = config.time.start_s;
    let seed = config.ensemble.seed;
    let samples = params
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let scene = Scene::generate(p.clone(), StreamSeed::new(seed, k as u64))?;
            let h = dc_gain(&cir_snapshot(0, 0, 0, &scene.positions_at(t), Components::All)?);
            let pt = p.array.power(0, 0);
            Ok((distances[k], path_loss(pt, pt * h)?))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    Ok(samples)
}

/// Close-in path-loss fit with a 1 m reference and the shadowing
/// statistics of its residuals.
pub fn pl_ci(config: &SimulationConfig) -> Result<Vec<ResultTable>, ExperimentError> {
    let mut c = config.clone();
    c.evolution.death_rate_per_m = 20.0;
    let samples = path_loss_samples(&c, &pl_distances())?;
    let fit = fit_ci(&samples, 1.0)?;
    let stats = shadowing_stats(&fit)?;

    let mut pts = ResultTable::new(
        "pl_samples",
        &[("distance", "m"), ("path_loss", "dB"), ("fitted", "dB"), ("residual", "dB")],
    );
    for ((d, pl), r) in fit.samples.iter().zip(&fit.residuals) {
        pts.push(vec![(*d).into(), (*pl).into(), fit.predict(*d).into(), (*r).into()]);
    }
    let mut summary = ResultTable::new(
        "pl_fit",
        &[
            ("reference_distance", "m"),
            ("reference_loss", "dB"),
            ("exponent", "1"),
            ("shadowing_mean", "dB"),
            ("shadowing_std", "dB"),
            ("ks_distance", "1"),
            ("ks_critical_5pct", "1"),
            ("normal_at_5pct", ""),
        ],
    );
    summary.push(vec![
        fit.reference_distance.into(),
        fit.reference_loss.into(),
        fit.exponent.into(),
        stats.mean.into(),
        stats.std_dev.into(),
        stats.ks_distance.into(),
        stats.ks_critical.into(),
        (stats.is_normal_at_5pct() as i64).into(),
    ]);
    let normal = statrs::distribution::Normal::new(stats.mean, stats.std_dev.max(f64::MIN_POSITIVE))
        .expect("finite parameters");
    let mut ecdf = ResultTable::new("shadowing_ecdf", &[("residual", "dB"), ("ecdf", "1"), ("normal_cdf", "1")]);
    for (x, p) in &stats.ecdf {
        use statrs::distribution::ContinuousCDF;
        ecdf.push(vec![(*x).into(), (*p).into(), normal.cdf(*x).into()]);
    }
    Ok(vec![pts, summary, ecdf])
}

/// Per-realization 3-dB bandwidths and the ensemble-mean response at one
/// field of view.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthPoint {
    pub fov_deg: f64,
    pub components: Components,
    /// `+∞` where the response stays above half power on the whole grid,
    /// NaN where no path reaches the PD.
    pub per_run: Vec<f64>,
    /// Median over realizations that receive any power.
    pub median: f64,
    pub none_fraction: f64,
    pub dark_fraction: f64,
    /// 3-dB bandwidth of the ensemble-mean transfer function.
    pub mean_response_f3db: f64,
    /// `|E{H(f)}|²` normalized to its DC value, on the frequency grid.
    pub mean_response: Vec<f64>,
}

const BISECTION_STEPS: usize = 200;

/// First frequency where `|E{H(f)}|² ≤ ½|E{H(0)}|²`, refined by bisection
/// on the exact mean response.
fn mean_response_bandwidth(cirs: &[Cir], grid: &FrequencyGrid, mean: &[Complex64]) -> f64 {
    let n = cirs.len() as f64;
    let h0 = cirs.iter().map(dc_gain).fold(CompensatedSum::default(), |mut s, x| {
        s.add(x);
        s
    });
    let half = 0.5 * (h0.value() / n).powi(2);
    let Some(k) = mean.iter().position(|v| v.norm_sqr() <= half) else {
        return f64::INFINITY;
    };
    if k == 0 {
        return grid.frequency(0);
    }
    let eval = |f: f64| {
        let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
        for c in cirs {
            let z = transfer_at(c, f);
            re.add(z.re);
            im.add(z.im);
        }
        Complex64::new(re.value() / n, im.value() / n).norm_sqr()
    };
    let (mut lo, mut hi) = (grid.frequency(k - 1), grid.frequency(k));
    for _ in 0..BISECTION_STEPS {
        if hi - lo <= 1e-9 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid) <= half {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn bandwidth_point(
    config: &SimulationConfig,
    fov_deg: f64,
    components: Components,
) -> Result<BandwidthPoint, ExperimentError> {
    let mut c = config.clone();
    apply_bandwidth_scenario(&mut c);
    c.receiver.fov_deg = fov_deg;
    let grid = c.frequency_grid()?;
    let t = c.time.start_s;
    let runs: Vec<(Cir, Option<Ctf>, f64)> = ensemble(&c)?.map(|scene| {
        let cir = cir_snapshot(0, 0, 0, &scene.positions_at(t), components)?;
        if cir.taps.is_empty() {
            // no path reaches the PD
            return Ok((cir, None, f64::NAN));
        }
        let h = ctf(&cir, &grid)?;
        let f3 = bandwidth_3db(&h)?.unwrap_or(f64::INFINITY);
        Ok((cir, Some(h), f3))
    })?;
    let per_run: Vec<f64> = runs.iter().map(|r| r.2).collect();
    let none_fraction = per_run.iter().filter(|v| v.is_infinite()).count() as f64 / per_run.len() as f64;
    let dark_fraction = per_run.iter().filter(|v| v.is_nan()).count() as f64 / per_run.len() as f64;
    let n = runs.len() as f64;
    let mean: Vec<Complex64> = (0..grid.len())
        .map(|k| {
            let (mut re, mut im) = (CompensatedSum::default(), CompensatedSum::default());
            for h in runs.iter().filter_map(|r| r.1.as_ref()) {
                let z = h.values()[k];
                re.add(z.re);
                im.add(z.im);
            }
            Complex64::new(re.value() / n, im.value() / n)
        })
        .collect();
    let cirs: Vec<Cir> = runs.into_iter().map(|r| r.0).collect();
    let mean_response_f3db = mean_response_bandwidth(&cirs, &grid, &mean);
    let dc = mean[0].norm_sqr();
    Ok(BandwidthPoint {
        fov_deg,
        components,
        median: median(&per_run),
        none_fraction,
        dark_fraction,
        mean_response_f3db,
        mean_response: mean.iter().map(|z| z.norm_sqr() / dc).collect(),
        per_run,
    })
}

/// 3-dB bandwidth of a single LED link across a field-of-view sweep.
pub fn bandwidth_fov(config: &SimulationConfig, fovs_deg: &[f64]) -> Result<Vec<ResultTable>, ExperimentError> {
    let grid = config.frequency_grid()?;
    let mut summary = ResultTable::new(
        "bandwidth_fov",
        &[
            ("components", ""),
            ("fov", "deg"),
            ("median_f3db", "Hz"),
            ("none_fraction", "1"),
            ("dark_fraction", "1"),
            ("mean_response_f3db", "Hz"),
            ("ensemble_size", ""),
        ],
    );
    let mut runs = ResultTable::new(
        "bandwidth_runs",
        &[("components", ""), ("fov", "deg"), ("realization", ""), ("f3db", "Hz")],
    );
    let mut response = ResultTable::new(
        "mean_response",
        &[("components", ""), ("fov", "deg"), ("frequency", "Hz"), ("normalized_power", "1")],
    );
    for (label, components) in [("all", Components::All), ("nlos", Components::NlosOnly)] {
        for &fov in fovs_deg {
            let p = bandwidth_point(config, fov, components)?;
            summary.push(vec![
                label.into(),
                fov.into(),
                p.median.into(),
                p.none_fraction.into(),
                p.dark_fraction.into(),
                p.mean_response_f3db.into(),
                p.per_run.len().into(),
            ]);
            for (r, v) in p.per_run.iter().enumerate() {
                runs.push(vec![label.into(), fov.into(), r.into(), (*v).into()]);
            }
            for (k, v) in p.mean_response.iter().enumerate() {
                response.push(vec![label.into(), fov.into(), grid.frequency(k).into(), (*v).into()]);
            }
        }
    }
    Ok(vec![summary, runs, response])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        let err = "no-such-preset".parse::<Experiment>().unwrap_err();
        assert!(matches!(err, ExperimentError::UnknownExperiment(ref s) if s == "no-such-preset"));
        assert!(err.to_string().contains("bandwidth-fov"));
    }

    #[test]
    fn gaussian_beam_half_power() {
        let p = gaussian_beam(15.0).unwrap();
        let on_axis = p.intensity(0.0, 0.0);
        let at_half = p.intensity(15f64.to_radians(), 0.0);
        assert!((at_half / on_axis - 0.5).abs() < 1e-3);
        assert_eq!(p.intensity(0.0, 3.0), 0.0);
    }

    #[test]
    fn median_handles_infinity() {
        assert_eq!(median(&[3.0, f64::INFINITY, 1.0]), 3.0);
        assert_eq!(median(&[1.0, 2.0, f64::INFINITY, f64::INFINITY]), f64::INFINITY);
        assert_eq!(median(&[2.0, f64::NAN, 4.0]), 3.0);
        assert!(median(&[]).is_nan());
    }

    #[test]
    fn pl_grid() {
        let d = pl_distances();
        assert_eq!(d.len(), 51);
        assert!((d[50] - 6.0).abs() < 1e-12);
    }
}
