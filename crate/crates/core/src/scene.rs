//! Stochastic environment: LED array and receiver descriptions, cluster and
//! scatterer generation, birth-death cluster evolution across the array and
//! linear motion over time.

use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, RngExt};
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    cart_to_sph, cluster_equivalent_normal, AnglePair, ArrayFrame, ArrayGeometry,
    GeometryError, ReceiverOrientation, Vector3,
};
use crate::optics::{Material, OpticsError, RadiationPattern, RxOptics, SourceSpectrum};
use crate::rng::{Purpose, StreamSeed};

/// Resampling budget for clusters whose equivalent normal is undefined.
pub const MAX_CLUSTER_ATTEMPTS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("LED row and column directions are not orthogonal (cosine {0:e})")]
    NonOrthogonalArray(f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error("no valid cluster after {MAX_CLUSTER_ATTEMPTS} attempts")]
    DegenerateCluster,
}

fn require(ok: bool, msg: impl FnOnce() -> String) -> Result<(), SceneError> {
    if ok {
        Ok(())
    } else {
        Err(SceneError::InvalidParameter(msg()))
    }
}

/// Direction `(cos α_E cos α_A, cos α_E sin α_A, sin α_E)` scaled by a speed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Motion {
    /// m/s
    pub speed: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

impl Motion {
    pub fn velocity(&self) -> Vector3 {
        Vector3::from_angles(self.azimuth, self.elevation) * self.speed
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedArray {
    geometry: ArrayGeometry,
    pattern: RadiationPattern,
    /// Row-major transmit powers, W.
    powers: Vec<f64>,
}

impl LedArray {
    pub fn new(geometry: ArrayGeometry, pattern: RadiationPattern, powers: Vec<f64>) -> Result<Self, SceneError> {
        require(geometry.rows >= 1 && geometry.cols >= 1, || "array needs at least one element".into())?;
        require(geometry.spacing_h > 0.0 && geometry.spacing_v > 0.0, || {
            "element spacings must be positive".into()
        })?;
        require(powers.len() == geometry.rows * geometry.cols, || {
            format!("expected {} transmit powers, got {}", geometry.rows * geometry.cols, powers.len())
        })?;
        require(powers.iter().all(|p| *p >= 0.0 && p.is_finite()), || {
            "transmit powers must be non-negative".into()
        })?;
        let c = geometry
            .orientation
            .row_direction()
            .dot(geometry.orientation.column_direction());
        if c.abs() > 1e-9 {
            // parallel directions are reported as a singular frame
            geometry.frame()?;
            return Err(SceneError::NonOrthogonalArray(c));
        }
        geometry.frame()?;
        Ok(Self {
            geometry,
            pattern,
            powers,
        })
    }

    /// Every element transmitting the same power.
    pub fn uniform(geometry: ArrayGeometry, pattern: RadiationPattern, power: f64) -> Result<Self, SceneError> {
        Self::new(geometry, pattern, vec![power; geometry.rows * geometry.cols])
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn pattern(&self) -> &RadiationPattern {
        &self.pattern
    }

    pub fn power(&self, row: usize, col: usize) -> f64 {
        self.powers[row * self.geometry.cols + col]
    }

    pub fn powers(&self) -> &[f64] {
        &self.powers
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverConfig {
    pub orientation: ReceiverOrientation,
    /// Photodiode area, m².
    pub area: f64,
    pub optics: RxOptics,
    pub motion: Motion,
    pub initial_position: Vector3,
}

impl ReceiverConfig {
    pub fn validate(&self) -> Result<(), SceneError> {
        require(self.area > 0.0, || format!("receiver area {} must be positive", self.area))?;
        require(self.motion.speed >= 0.0, || "receiver speed must be non-negative".into())?;
        self.orientation.initial_pd_angles()?;
        Ok(())
    }
}

/// Birth-death evolution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    /// λ_B, 1/m
    pub birth_rate: f64,
    /// λ_D, 1/m
    pub death_rate: f64,
    /// D_c, m
    pub correlation_distance: f64,
}

impl EvolutionParams {
    pub fn initial_count(&self) -> usize {
        (self.birth_rate / self.death_rate).round() as usize
    }

    /// Survival probability over one step of `spacing` along a direction of
    /// elevation `elevation`.
    pub fn remain_probability(&self, spacing: f64, elevation: f64) -> f64 {
        let mut c = elevation.cos().abs();
        if c < 1e-12 {
            c = 0.0;
        }
        (-self.birth_rate * spacing * c / self.correlation_distance).exp()
    }

    fn validate(&self) -> Result<(), SceneError> {
        require(
            self.birth_rate > 0.0 && self.death_rate > 0.0 && self.correlation_distance > 0.0,
            || "birth rate, death rate and correlation distance must be positive".into(),
        )
    }
}

/// Wrapped-Gaussian angle distribution of cluster directions on one side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleDistribution {
    pub azimuth_mean: f64,
    pub azimuth_std: f64,
    pub elevation_mean: f64,
    pub elevation_std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub tx_angles: AngleDistribution,
    pub rx_angles: AngleDistribution,
    /// Mean of the exponential cluster distance, m.
    pub distance_mean: f64,
    /// Scatterer offset deviations along the cluster axis and the two
    /// transverse directions (σ_DS, σ_AS, σ_ES), m.
    pub spread: [f64; 3],
    pub scatterers_per_cluster: usize,
    /// Effective cluster area A_c, m².
    pub cluster_area: f64,
    /// Fraction η_SB of single-bounce clusters.
    pub sb_ratio: f64,
    pub motion: Motion,
}

impl ClusterParams {
    fn validate(&self) -> Result<(), SceneError> {
        require(self.distance_mean > 0.0, || "cluster distance mean must be positive".into())?;
        require(self.spread.iter().all(|s| *s >= 0.0), || "scatterer spreads must be non-negative".into())?;
        require(self.scatterers_per_cluster >= 1, || "at least one scatterer per cluster".into())?;
        require(self.cluster_area > 0.0, || "cluster area must be positive".into())?;
        require((0.0..=1.0).contains(&self.sb_ratio), || "single-bounce ratio must lie in [0, 1]".into())?;
        require(self.motion.speed >= 0.0, || "cluster speed must be non-negative".into())?;
        for a in [self.tx_angles, self.rx_angles] {
            require(a.azimuth_std >= 0.0 && a.elevation_std >= 0.0, || {
                "angle deviations must be non-negative".into()
            })?;
        }
        Ok(())
    }
}

/// Source spectrum and material mix used for effective reflectances.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumParams {
    pub source: SourceSpectrum,
    /// Selection weights in the order of [`Material::ALL`].
    pub material_weights: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub array: LedArray,
    pub receiver: ReceiverConfig,
    pub evolution: EvolutionParams,
    pub clusters: ClusterParams,
    pub spectrum: SpectrumParams,
}

impl SceneParams {
    /// Per-step survival probabilities down a column and along a row.
    pub fn remain_probabilities(&self) -> (f64, f64) {
        let g = self.array.geometry();
        (
            self.evolution.remain_probability(g.spacing_h, g.orientation.column_elevation),
            self.evolution.remain_probability(g.spacing_v, g.orientation.row_elevation),
        )
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.receiver.validate()?;
        self.evolution.validate()?;
        self.clusters.validate()?;
        let w = &self.spectrum.material_weights;
        require(w.iter().all(|x| *x >= 0.0) && w.iter().sum::<f64>() > 0.0, || {
            "material weights must be non-negative with a positive sum".into()
        })?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Near the transmitter (`C^A`).
    Tx,
    /// Near the receiver (`C^Z`).
    Rx,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    /// GCS position at t = 0.
    pub position: Vector3,
    /// Effective area, m².
    pub area: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub side: Side,
    /// Direction of the center as seen from the side's reference point.
    pub angles: AnglePair,
    pub distance: f64,
    /// GCS center at t = 0.
    pub center: Vector3,
    /// Equivalent normal, fixed at initialization.
    pub normal: Vector3,
    pub velocity: Vector3,
    pub material: Material,
    /// Effective reflectance Γ.
    pub reflectance: f64,
    pub scatterers: Vec<Scatterer>,
}

/// Draw direction angles and distance for one cluster.
///
/// Azimuths are wrapped modulo 2π; elevations past a pole fold back over it.
pub fn sample_cluster_direction<R: Rng + ?Sized>(
    angles: &AngleDistribution,
    distance_mean: f64,
    rng: &mut R,
) -> (AnglePair, f64) {
    let ya: f64 = rng.sample(StandardNormal);
    let ye: f64 = rng.sample(StandardNormal);
    let az = angles.azimuth_std * ya + angles.azimuth_mean;
    let el = angles.elevation_std * ye + angles.elevation_mean;
    let exp = Exp::new(1.0 / distance_mean).expect("positive distance mean");
    let d = loop {
        let d: f64 = exp.sample(rng);
        if d > 0.0 {
            break d;
        }
    };
    (AnglePair::folded(az, el), d)
}

/// Rotate an offset in cluster coordinates (first axis along the cluster
/// direction) into the GCS.
fn rotate_offset(offset: Vector3, azimuth: f64, elevation: f64) -> Vector3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    // R_y(elevation) with the sign convention that lifts +x toward +z
    let p = Vector3::new(ce * offset.x - se * offset.z, offset.y, se * offset.x + ce * offset.z);
    Vector3::new(ca * p.x - sa * p.y, sa * p.x + ca * p.y, p.z)
}

/// Gaussian scatterer cloud around a cluster center located at
/// `origin + distance·dir(angles)`.
pub fn generate_scatterers<R: Rng + ?Sized>(
    origin: Vector3,
    angles: AnglePair,
    distance: f64,
    spread: [f64; 3],
    count: usize,
    cluster_area: f64,
    rng: &mut R,
) -> Vec<Scatterer> {
    let area = cluster_area / count as f64;
    (0..count)
        .map(|_| {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let dz: f64 = rng.sample(StandardNormal);
            let local = Vector3::new(distance + spread[0] * dx, spread[1] * dy, spread[2] * dz);
            Scatterer {
                position: origin + rotate_offset(local, angles.azimuth(), angles.elevation()),
                area,
            }
        })
        .collect()
}

/// Equivalent normal of a cluster with GCS center `center`, relative to the
/// initial `L11`-receiver axis along `+x`.
fn normal_from_center(center: Vector3) -> Result<Vector3, GeometryError> {
    let (a, r) = cart_to_sph(center).map_err(|_| GeometryError::DegenerateNormal)?;
    cluster_equivalent_normal(r, a.azimuth(), a.elevation())
}

/// Per-element cluster observability produced by birth-death evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityTensor {
    rows: usize,
    cols: usize,
    total: usize,
    initial: usize,
    mask: Vec<bool>,
    remain_h: f64,
    remain_v: f64,
}

impl VisibilityTensor {
    /// Every element observes every one of `total` clusters.
    pub fn all_visible(rows: usize, cols: usize, total: usize) -> Self {
        Self {
            rows,
            cols,
            total,
            initial: total,
            mask: vec![true; rows * cols * total],
            remain_h: 1.0,
            remain_v: 1.0,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    /// Cluster count at element (0, 0).
    pub fn initial(&self) -> usize {
        self.initial
    }

    /// Survival probabilities per step along a column and along a row.
    pub fn remain_probabilities(&self) -> (f64, f64) {
        (self.remain_h, self.remain_v)
    }

    pub fn is_visible(&self, row: usize, col: usize, cluster: usize) -> bool {
        self.mask[(row * self.cols + col) * self.total + cluster]
    }

    pub fn visible_count(&self, row: usize, col: usize) -> usize {
        (0..self.total).filter(|&n| self.is_visible(row, col, n)).count()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.total)
    }
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let p = Poisson::new(mean).expect("finite positive Poisson mean");
    let k: f64 = p.sample(rng);
    k as usize
}

/// One evolution step: survivors of `prev` plus newly born clusters.
fn evolve_step<R: Rng + ?Sized>(prev: &[usize], remain: f64, birth_mean: f64, next_id: &mut usize, rng: &mut R) -> Vec<usize> {
    let mut out: Vec<usize> = prev.iter().copied().filter(|_| rng.random::<f64>() < remain).collect();
    let births = poisson_count(birth_mean * (1.0 - remain), rng);
    out.extend(*next_id..*next_id + births);
    *next_id += births;
    out
}

/// Birth-death evolution down the first column, then along every row.
pub fn evolve_visibility<R: Rng + ?Sized>(
    geometry: &ArrayGeometry,
    evolution: &EvolutionParams,
    rng: &mut R,
) -> VisibilityTensor {
    let (rows, cols) = (geometry.rows, geometry.cols);
    let initial = evolution.initial_count();
    let birth_mean = evolution.birth_rate / evolution.death_rate;
    let remain_h = evolution.remain_probability(geometry.spacing_h, geometry.orientation.column_elevation);
    let remain_v = evolution.remain_probability(geometry.spacing_v, geometry.orientation.row_elevation);

    let mut sets: Vec<Vec<usize>> = vec![Vec::new(); rows * cols];
    let mut next_id = initial;
    sets[0] = (0..initial).collect();
    for i in 1..rows {
        sets[i * cols] = evolve_step(&sets[(i - 1) * cols], remain_h, birth_mean, &mut next_id, rng);
    }
    for i in 0..rows {
        for j in 1..cols {
            let k = i * cols + j;
            sets[k] = evolve_step(&sets[k - 1], remain_v, birth_mean, &mut next_id, rng);
        }
    }
    let total = next_id;
    let mut mask = vec![false; rows * cols * total];
    for (k, set) in sets.iter().enumerate() {
        for &n in set {
            mask[k * total + n] = true;
        }
    }
    VisibilityTensor {
        rows,
        cols,
        total,
        initial,
        mask,
        remain_h,
        remain_v,
    }
}

/// Number of receiver-side clusters for `total` transmitter-side clusters.
pub fn double_bounce_count(total: usize, sb_ratio: f64) -> usize {
    // the small offset keeps products like 20·(1-0.9) from rounding up to 3
    ((total as f64 * (1.0 - sb_ratio)) - 1e-9).ceil().max(0.0) as usize
}

/// Choose which transmitter-side clusters are double-bounce and pair them
/// with receiver-side clusters round-robin. Returns the partner per cluster.
pub fn split_sb_db<R: Rng + ?Sized>(total: usize, rx_count: usize, db_count: usize, rng: &mut R) -> Vec<Option<usize>> {
    let mut order: Vec<usize> = (0..total).collect();
    let db_count = db_count.min(total);
    for k in 0..db_count {
        let pick = rng.random_range(k..total);
        order.swap(k, pick);
    }
    let mut partner = vec![None; total];
    if rx_count == 0 {
        return partner;
    }
    for (slot, &cluster) in order[..db_count].iter().enumerate() {
        partner[cluster] = Some(slot % rx_count);
    }
    partner
}

/// One realization of the environment.
#[derive(Debug, Clone)]
pub struct Scene {
    params: Arc<SceneParams>,
    seed: StreamSeed,
    frame: ArrayFrame,
    visibility: VisibilityTensor,
    tx_clusters: Vec<Cluster>,
    rx_clusters: Vec<Cluster>,
    partner: Vec<Option<usize>>,
    pd_angles: Vec<(f64, f64)>,
    /// Time already elapsed relative to the generated initial state, s.
    elapsed: f64,
}

impl Scene {
    pub fn generate(params: Arc<SceneParams>, seed: StreamSeed) -> Result<Self, SceneError> {
        params.validate()?;
        let geometry = *params.array.geometry();
        let frame = geometry.frame()?;
        let visibility = evolve_visibility(&geometry, &params.evolution, &mut seed.stream(Purpose::Evolution, 0));
        Self::assemble(params, seed, frame, visibility)
    }

    /// Generate with a caller-supplied visibility tensor instead of running
    /// the evolution.
    pub fn with_visibility(
        params: Arc<SceneParams>,
        seed: StreamSeed,
        visibility: VisibilityTensor,
    ) -> Result<Self, SceneError> {
        params.validate()?;
        let geometry = *params.array.geometry();
        require(visibility.rows == geometry.rows && visibility.cols == geometry.cols, || {
            "visibility tensor does not match the array size".into()
        })?;
        let frame = geometry.frame()?;
        Self::assemble(params, seed, frame, visibility)
    }

    fn assemble(
        params: Arc<SceneParams>,
        seed: StreamSeed,
        frame: ArrayFrame,
        visibility: VisibilityTensor,
    ) -> Result<Self, SceneError> {
        let total = visibility.total;
        let cp = params.clusters;
        let rx_count = double_bounce_count(total, cp.sb_ratio);

        let weights = WeightedIndex::new(params.spectrum.material_weights)
            .map_err(|e| SceneError::InvalidParameter(format!("material weights: {e}")))?;
        let mut gammas = [0.0; 4];
        for (g, m) in gammas.iter_mut().zip(Material::ALL) {
            *g = params.spectrum.source.effective_reflectance(m.reflectance())?;
        }

        let rx0 = params.receiver.initial_position;
        let build = |side: Side, index: usize| -> Result<Cluster, SceneError> {
            let (purpose, origin, dist) = match side {
                Side::Tx => (Purpose::TxClusters, Vector3::ZERO, &cp.tx_angles),
                Side::Rx => (Purpose::RxClusters, rx0, &cp.rx_angles),
            };
            let mut rng = seed.stream(purpose, index as u64);
            let mut placed = None;
            for _ in 0..MAX_CLUSTER_ATTEMPTS {
                let (angles, distance) = sample_cluster_direction(dist, cp.distance_mean, &mut rng);
                let center = origin + angles.unit_vector() * distance;
                match normal_from_center(center) {
                    Ok(normal) => {
                        placed = Some((angles, distance, center, normal));
                        break;
                    }
                    Err(GeometryError::DegenerateNormal) => continue,
                    Err(e) => return Err(e.into()),
                }
            }
            let (angles, distance, center, normal) = placed.ok_or(SceneError::DegenerateCluster)?;
            let salt = match side {
                Side::Tx => 0,
                Side::Rx => 1 << 40,
            };
            let material = Material::ALL[weights.sample(&mut seed.stream(Purpose::Materials, salt | index as u64))];
            let scatterers = generate_scatterers(
                origin,
                angles,
                distance,
                cp.spread,
                cp.scatterers_per_cluster,
                cp.cluster_area,
                &mut seed.stream(Purpose::Scatterers, salt | index as u64),
            );
            Ok(Cluster {
                side,
                angles,
                distance,
                center,
                normal,
                velocity: cp.motion.velocity(),
                material,
                reflectance: gammas[material as usize],
                scatterers,
            })
        };

        let tx_clusters = (0..total).map(|n| build(Side::Tx, n)).collect::<Result<Vec<_>, _>>()?;
        let rx_clusters = (0..rx_count).map(|n| build(Side::Rx, n)).collect::<Result<Vec<_>, _>>()?;
        let partner = split_sb_db(total, rx_count, rx_count, &mut seed.stream(Purpose::Pairing, 0));
        let pd_angles = params.receiver.orientation.initial_pd_angles()?;
        Ok(Self {
            params,
            seed,
            frame,
            visibility,
            tx_clusters,
            rx_clusters,
            partner,
            pd_angles,
            elapsed: 0.0,
        })
    }

    pub fn params(&self) -> &SceneParams {
        &self.params
    }

    pub fn shared_params(&self) -> &Arc<SceneParams> {
        &self.params
    }

    pub fn seed(&self) -> StreamSeed {
        self.seed
    }

    pub fn frame(&self) -> &ArrayFrame {
        &self.frame
    }

    pub fn visibility(&self) -> &VisibilityTensor {
        &self.visibility
    }

    pub fn tx_clusters(&self) -> &[Cluster] {
        &self.tx_clusters
    }

    pub fn rx_clusters(&self) -> &[Cluster] {
        &self.rx_clusters
    }

    /// Receiver-side partner of a transmitter-side cluster, `None` for
    /// single-bounce clusters.
    pub fn partner(&self, cluster: usize) -> Option<usize> {
        self.partner[cluster]
    }

    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// The same realization with its clock advanced by `dt`.
    pub fn advanced(&self, dt: f64) -> Scene {
        let mut s = self.clone();
        s.elapsed = self.elapsed + dt;
        s
    }

    /// Positions and orientations at time `t` after the current state.
    pub fn positions_at(&self, t: f64) -> Snapshot<'_> {
        let time = self.elapsed + t;
        let rx = &self.params.receiver;
        let rx_position = rx.initial_position + rx.motion.velocity() * time;
        let pd_normals = self
            .pd_angles
            .iter()
            .map(|&(az, el)| {
                Vector3::from_angles(az + rx.orientation.azimuth_rate * time, el + rx.orientation.elevation_rate * time)
            })
            .collect();
        Snapshot {
            scene: self,
            time,
            rx_position,
            pd_normals,
        }
    }
}

/// Scene state at one instant. Scatterer positions are evaluated on demand.
#[derive(Debug, Clone)]
pub struct Snapshot<'a> {
    scene: &'a Scene,
    time: f64,
    rx_position: Vector3,
    pd_normals: Vec<Vector3>,
}

impl<'a> Snapshot<'a> {
    pub fn scene(&self) -> &'a Scene {
        self.scene
    }

    /// Absolute time since generation, s.
    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rx_position(&self) -> Vector3 {
        self.rx_position
    }

    pub fn pd_normals(&self) -> &[Vector3] {
        &self.pd_normals
    }

    pub fn scatterer_position(&self, cluster: &Cluster, m: usize) -> Vector3 {
        cluster.scatterers[m].position + cluster.velocity * self.time
    }
}
