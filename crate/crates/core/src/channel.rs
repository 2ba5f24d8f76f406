//! Ray powers and delays, and assembly of channel impulse responses.
//!
//! Taps carry dimensionless power gains (the source patterns are normalized
//! to 1 W); transmit powers enter only when computing received power.

use std::f64::consts::PI;

use thiserror::Error;

use crate::geometry::{led_position, GeometryError, Vector3};
use crate::scene::{Cluster, Scene, Snapshot};

/// Propagation speed of light, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Distances below this are treated as coincident points.
const MIN_DISTANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("coincident points on a ray")]
    ZeroDistance,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("index ({row}, {col}, {pd}) outside the channel matrix")]
    IndexOutOfRange { row: usize, col: usize, pd: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TapKind {
    LineOfSight,
    SingleBounce {
        cluster: usize,
        scatterer: usize,
    },
    DoubleBounce {
        cluster: usize,
        rx_cluster: usize,
        scatterer: usize,
    },
}

impl TapKind {
    pub fn is_los(&self) -> bool {
        matches!(self, TapKind::LineOfSight)
    }

    /// Transmitter-side cluster index for NLoS taps.
    pub fn cluster(&self) -> Option<usize> {
        match *self {
            TapKind::LineOfSight => None,
            TapKind::SingleBounce { cluster, .. } | TapKind::DoubleBounce { cluster, .. } => Some(cluster),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayTap {
    pub power: f64,
    /// s
    pub delay: f64,
    pub kind: TapKind,
}

/// Tap list of one sub-channel `(row, col, pd)` at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Cir {
    pub row: usize,
    pub col: usize,
    pub pd: usize,
    pub time: f64,
    /// Sorted by delay.
    pub taps: Vec<RayTap>,
}

impl Cir {
    pub fn new(row: usize, col: usize, pd: usize, time: f64, mut taps: Vec<RayTap>) -> Self {
        taps.sort_by(|a, b| a.delay.total_cmp(&b.delay));
        Self {
            row,
            col,
            pd,
            time,
            taps,
        }
    }

    /// Sum of tap powers.
    pub fn dc_gain(&self) -> f64 {
        self.taps.iter().map(|t| t.power).sum()
    }

    pub fn los_power(&self) -> f64 {
        self.taps.iter().filter(|t| t.kind.is_los()).map(|t| t.power).sum()
    }

    /// Number of paths with nonzero power.
    pub fn path_count(&self) -> usize {
        self.taps.len()
    }
}

/// Which propagation components to collect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Components {
    #[default]
    All,
    LosOnly,
    NlosOnly,
}

impl Components {
    fn los(self) -> bool {
        self != Components::NlosOnly
    }

    fn nlos(self) -> bool {
        self != Components::LosOnly
    }
}

/// Factors of a line-of-sight ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosTerms {
    /// Source intensity toward the receiver, W/sr.
    pub intensity: f64,
    pub rx_area: f64,
    pub cos_incidence: f64,
    pub distance: f64,
    /// `G·T·V` at the incidence angle.
    pub rx_gain: f64,
}

pub fn los_power(t: &LosTerms) -> f64 {
    t.intensity * t.rx_area * t.cos_incidence / (t.distance * t.distance) * t.rx_gain
}

/// One diffuse bounce: capture by an area at some distance, then
/// re-emission with reflectance `Γ` and pattern `cos/π`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BounceTerms {
    pub area: f64,
    pub cos_arrival: f64,
    pub distance: f64,
    pub reflectance: f64,
    pub cos_departure: f64,
}

impl BounceTerms {
    fn factor(&self) -> f64 {
        self.area * self.cos_arrival / (self.distance * self.distance) * self.reflectance * self.cos_departure / PI
    }
}

/// Factors of the final hop from the last scatterer to the photodiode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxHop {
    pub rx_area: f64,
    pub cos_incidence: f64,
    pub distance: f64,
    pub rx_gain: f64,
}

impl RxHop {
    fn factor(&self) -> f64 {
        self.rx_area * self.cos_incidence / (self.distance * self.distance) * self.rx_gain
    }
}

/// Single-bounce ray power.
pub fn sb_power(intensity: f64, bounce: &BounceTerms, rx: &RxHop) -> f64 {
    intensity * bounce.factor() * rx.factor()
}

/// Double-bounce ray power: the first scatterer re-emits toward the second,
/// which re-emits toward the receiver.
pub fn db_power(intensity: f64, first: &BounceTerms, second: &BounceTerms, rx: &RxHop) -> f64 {
    intensity * first.factor() * second.factor() * rx.factor()
}

fn span(from: Vector3, to: Vector3) -> Result<(Vector3, f64), ChannelError> {
    let v = to - from;
    let d = v.norm();
    if d < MIN_DISTANCE {
        return Err(ChannelError::ZeroDistance);
    }
    Ok((v * (1.0 / d), d))
}

/// Per-(element, PD) quantities shared by all rays of a sub-channel.
struct Link<'s, 'a> {
    snap: &'s Snapshot<'a>,
    row: usize,
    col: usize,
    led: Vector3,
    normal: Vector3,
}

impl<'s, 'a> Link<'s, 'a> {
    fn new(snap: &'s Snapshot<'a>, row: usize, col: usize, pd: usize) -> Result<Self, ChannelError> {
        let scene = snap.scene();
        let g = scene.params().array.geometry();
        if row >= g.rows || col >= g.cols || pd >= snap.pd_normals().len() {
            return Err(ChannelError::IndexOutOfRange { row, col, pd });
        }
        Ok(Self {
            snap,
            row,
            col,
            led: led_position(row, col, g),
            normal: snap.pd_normals()[pd],
        })
    }

    fn intensity_toward(&self, p: Vector3) -> Result<f64, ChannelError> {
        let scene = self.snap.scene();
        let a = scene.frame().angles_in_element(p, self.row, self.col)?;
        Ok(scene.params().array.pattern().intensity(a.elevation(), a.azimuth()))
    }

    /// Receiver hop from `from`, or `None` when it is not received.
    fn rx_hop(&self, from: Vector3) -> Result<Option<(RxHop, f64)>, ChannelError> {
        let rx = self.snap.rx_position();
        let (dir, d) = span(rx, from)?;
        let cos = self.normal.dot(dir);
        if cos < 0.0 {
            return Ok(None);
        }
        let receiver = &self.snap.scene().params().receiver;
        let psi = cos.min(1.0).acos();
        let gain = receiver.optics.receive_gain(psi);
        if gain == 0.0 {
            return Ok(None);
        }
        Ok(Some((
            RxHop {
                rx_area: receiver.area,
                cos_incidence: cos,
                distance: d,
                rx_gain: gain,
            },
            d,
        )))
    }

    fn los(&self) -> Result<Option<RayTap>, ChannelError> {
        let Some((hop, d)) = self.rx_hop(self.led)? else {
            return Ok(None);
        };
        let intensity = self.intensity_toward(self.snap.rx_position())?;
        let power = los_power(&LosTerms {
            intensity,
            rx_area: hop.rx_area,
            cos_incidence: hop.cos_incidence,
            distance: hop.distance,
            rx_gain: hop.rx_gain,
        });
        Ok(positive(power, d / SPEED_OF_LIGHT, TapKind::LineOfSight))
    }

    fn sb(&self, cluster_index: usize, m: usize) -> Result<Option<RayTap>, ChannelError> {
        let cluster = &self.snap.scene().tx_clusters()[cluster_index];
        let s = self.snap.scatterer_position(cluster, m);
        let (to_led, d_t) = span(s, self.led)?;
        let (to_rx, d_r) = span(s, self.snap.rx_position())?;
        let cos_arrival = cluster.normal.dot(to_led);
        let cos_departure = cluster.normal.dot(to_rx);
        if cos_arrival < 0.0 || cos_departure < 0.0 {
            return Ok(None);
        }
        let Some((hop, _)) = self.rx_hop(s)? else {
            return Ok(None);
        };
        let bounce = BounceTerms {
            area: cluster.scatterers[m].area,
            cos_arrival,
            distance: d_t,
            reflectance: cluster.reflectance,
            cos_departure,
        };
        let power = sb_power(self.intensity_toward(s)?, &bounce, &hop);
        Ok(positive(
            power,
            (d_t + d_r) / SPEED_OF_LIGHT,
            TapKind::SingleBounce {
                cluster: cluster_index,
                scatterer: m,
            },
        ))
    }

    fn db(&self, cluster_index: usize, rx_index: usize, m: usize) -> Result<Option<RayTap>, ChannelError> {
        let scene = self.snap.scene();
        let a: &Cluster = &scene.tx_clusters()[cluster_index];
        let z: &Cluster = &scene.rx_clusters()[rx_index];
        let sa = self.snap.scatterer_position(a, m);
        let sz = self.snap.scatterer_position(z, m);
        let (a_to_led, d_t) = span(sa, self.led)?;
        let (a_to_z, d_s) = span(sa, sz)?;
        let (z_to_rx, d_r) = span(sz, self.snap.rx_position())?;
        let cosines = [
            a.normal.dot(a_to_led),
            a.normal.dot(a_to_z),
            z.normal.dot(-a_to_z),
            z.normal.dot(z_to_rx),
        ];
        if cosines.iter().any(|c| *c < 0.0) {
            return Ok(None);
        }
        let Some((hop, _)) = self.rx_hop(sz)? else {
            return Ok(None);
        };
        let first = BounceTerms {
            area: a.scatterers[m].area,
            cos_arrival: cosines[0],
            distance: d_t,
            reflectance: a.reflectance,
            cos_departure: cosines[1],
        };
        let second = BounceTerms {
            area: z.scatterers[m].area,
            cos_arrival: cosines[2],
            distance: d_s,
            reflectance: z.reflectance,
            cos_departure: cosines[3],
        };
        let power = db_power(self.intensity_toward(sa)?, &first, &second, &hop);
        Ok(positive(
            power,
            (d_t + d_s + d_r) / SPEED_OF_LIGHT,
            TapKind::DoubleBounce {
                cluster: cluster_index,
                rx_cluster: rx_index,
                scatterer: m,
            },
        ))
    }
}

fn positive(power: f64, delay: f64, kind: TapKind) -> Option<RayTap> {
    (power > 0.0).then_some(RayTap { power, delay, kind })
}

/// Line-of-sight tap from element `(row, col)` to PD `pd`, `None` when it is
/// outside the field of view or carries no power.
pub fn los_tap(row: usize, col: usize, pd: usize, snap: &Snapshot<'_>) -> Result<Option<RayTap>, ChannelError> {
    Link::new(snap, row, col, pd)?.los()
}

/// Single-bounce tap through scatterer `m` of transmitter-side cluster
/// `cluster`.
pub fn sb_tap(
    row: usize,
    col: usize,
    pd: usize,
    cluster: usize,
    m: usize,
    snap: &Snapshot<'_>,
) -> Result<Option<RayTap>, ChannelError> {
    Link::new(snap, row, col, pd)?.sb(cluster, m)
}

/// Double-bounce tap through scatterer `m` of cluster `cluster` and then
/// scatterer `m` of receiver-side cluster `rx_cluster`.
pub fn db_tap(
    row: usize,
    col: usize,
    pd: usize,
    cluster: usize,
    rx_cluster: usize,
    m: usize,
    snap: &Snapshot<'_>,
) -> Result<Option<RayTap>, ChannelError> {
    Link::new(snap, row, col, pd)?.db(cluster, rx_cluster, m)
}

/// All taps of sub-channel `(row, col, pd)` at the snapshot instant.
/// Clusters not observed by the element contribute nothing.
pub fn cir_snapshot(
    row: usize,
    col: usize,
    pd: usize,
    snap: &Snapshot<'_>,
    components: Components,
) -> Result<Cir, ChannelError> {
    cir_snapshot_masked(row, col, pd, snap, components, (row, col))
}

/// Like [`cir_snapshot`], but NLoS clusters are selected by what element
/// `mask_element` observes instead of `(row, col)`.
pub fn cir_snapshot_masked(
    row: usize,
    col: usize,
    pd: usize,
    snap: &Snapshot<'_>,
    components: Components,
    mask_element: (usize, usize),
) -> Result<Cir, ChannelError> {
    let link = Link::new(snap, row, col, pd)?;
    let scene = snap.scene();
    let mut taps = Vec::new();
    if components.los() {
        taps.extend(link.los()?);
    }
    if components.nlos() {
        let vis = scene.visibility();
        for (n, cluster) in scene.tx_clusters().iter().enumerate() {
            if !vis.is_visible(mask_element.0, mask_element.1, n) {
                continue;
            }
            let partner = scene.partner(n);
            for m in 0..cluster.scatterers.len() {
                let tap = match partner {
                    None => link.sb(n, m)?,
                    Some(z) => link.db(n, z, m)?,
                };
                taps.extend(tap);
            }
        }
    }
    Ok(Cir::new(row, col, pd, snap.time(), taps))
}

/// Every sub-channel at one instant, indexed `(row, col, pd)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub time: f64,
    rows: usize,
    cols: usize,
    pds: usize,
    cirs: Vec<Cir>,
}

impl ChannelMatrix {
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.pds)
    }

    pub fn get(&self, row: usize, col: usize, pd: usize) -> &Cir {
        &self.cirs[(row * self.cols + col) * self.pds + pd]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Cir> {
        self.cirs.iter()
    }
}

pub fn channel_matrix(scene: &Scene, t: f64, components: Components) -> Result<ChannelMatrix, ChannelError> {
    let snap = scene.positions_at(t);
    let g = scene.params().array.geometry();
    let pds = snap.pd_normals().len();
    let mut cirs = Vec::with_capacity(g.rows * g.cols * pds);
    for i in 0..g.rows {
        for j in 0..g.cols {
            for p in 0..pds {
                cirs.push(cir_snapshot(i, j, p, &snap, components)?);
            }
        }
    }
    Ok(ChannelMatrix {
        time: snap.time(),
        rows: g.rows,
        cols: g.cols,
        pds,
        cirs,
    })
}

/// Channel matrices on a time grid; each sample is evaluated from exact
/// positions at that instant.
pub fn channel_over_time(
    scene: &Scene,
    times: &[f64],
    components: Components,
) -> Result<Vec<ChannelMatrix>, ChannelError> {
    times.iter().map(|&t| channel_matrix(scene, t, components)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn los_power_hand_value() {
        let p = los_power(&LosTerms {
            intensity: 1.0 / PI,
            rx_area: 1e-4,
            cos_incidence: 1.0,
            distance: 2.0,
            rx_gain: 1.0,
        });
        assert!((p - 7.957_747_154_594_767e-6).abs() < 1e-18);
        let far = los_power(&LosTerms {
            distance: 4.0,
            intensity: 1.0 / PI,
            rx_area: 1e-4,
            cos_incidence: 1.0,
            rx_gain: 1.0,
        });
        assert!((p / far - 4.0).abs() < 1e-12);
    }

    #[test]
    fn sb_power_hand_value() {
        let bounce = BounceTerms {
            area: 0.01,
            cos_arrival: 1.0,
            distance: 1.0,
            reflectance: 0.5,
            cos_departure: 1.0,
        };
        let rx = RxHop {
            rx_area: 1e-4,
            cos_incidence: 1.0,
            distance: 1.0,
            rx_gain: 1.0,
        };
        let p = sb_power(1.0 / PI, &bounce, &rx);
        let want = (1.0 / PI) * 0.01 * 0.5 * (1.0 / PI) * 1e-4;
        assert!((p - want).abs() <= 1e-15 * want);
        assert!((p - 5.066e-8).abs() < 1e-11);
    }

    #[test]
    fn db_reduces_to_sb_times_factor() {
        let first = BounceTerms {
            area: 0.02,
            cos_arrival: 0.8,
            distance: 1.3,
            reflectance: 0.6,
            cos_departure: 0.7,
        };
        let second = BounceTerms {
            area: 0.01,
            cos_arrival: 1.0,
            distance: 0.5,
            reflectance: 0.4,
            cos_departure: 1.0,
        };
        let rx = RxHop {
            rx_area: 1e-4,
            cos_incidence: 0.9,
            distance: 0.7,
            rx_gain: 1.0,
        };
        let factor = 0.01 / 0.25 * 0.4 / PI;
        let want = sb_power(0.3, &first, &rx) * factor;
        let got = db_power(0.3, &first, &second, &rx);
        assert!((got - want).abs() <= 1e-14 * want);
    }

    #[test]
    fn cir_sorts_and_sums() {
        let taps = vec![
            RayTap {
                power: 2.0,
                delay: 3e-9,
                kind: TapKind::LineOfSight,
            },
            RayTap {
                power: 1.0,
                delay: 1e-9,
                kind: TapKind::SingleBounce { cluster: 0, scatterer: 0 },
            },
        ];
        let c = Cir::new(0, 0, 0, 0.0, taps);
        assert_eq!(c.taps[0].delay, 1e-9);
        assert_eq!(c.dc_gain(), 3.0);
        assert_eq!(c.los_power(), 2.0);
    }
}
