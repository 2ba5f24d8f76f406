//! Coordinate systems, frame transformations and angle computations.
//!
//! The global coordinate system (GCS) has its origin at the benchmark LED
//! element `L11`. Every LED element has a local coordinate system (LCS)
//! whose `x'` axis is the element normal and whose `y'z'` plane contains the
//! array. Azimuths are kept in `[0, 2π)` and elevations in `[-π/2, π/2]`.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Vectors shorter than this are treated as the zero vector.
pub const ZERO_VECTOR_EPS: f64 = 1e-15;
/// Frames with `|det|` below this are treated as singular.
pub const SINGULAR_DET_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("zero-length vector has no direction")]
    ZeroVector,
    #[error("frame matrix is singular (|det| = {0:e}); orientation angles are degenerate")]
    SingularFrame(f64),
    #[error("elevation {0} rad is outside [-π/2, π/2]")]
    ElevationOutOfRange(f64),
    #[error("invalid angle diversity receiver: {0}")]
    InvalidAdr(String),
    #[error("cluster center lies on the LoS axis; equivalent normal is undefined")]
    DegenerateNormal,
    #[error("element index ({row}, {col}) outside a {rows}x{cols} array")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
}

/// Cartesian vector in meters, or unitless when used as a direction.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vector3 {
    pub const ZERO: Vector3 = Vector3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Vector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vector3) -> Vector3 {
        Vector3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector along `self`.
    pub fn normalized(self) -> Result<Vector3, GeometryError> {
        let n = self.norm();
        if n < ZERO_VECTOR_EPS {
            return Err(GeometryError::ZeroVector);
        }
        Ok(self * (1.0 / n))
    }

    /// Unit direction `(cos el cos az, cos el sin az, sin el)`.
    ///
    /// Accepts any real angles; used for orientations that drift outside the
    /// canonical ranges under rotation.
    pub fn from_angles(azimuth: f64, elevation: f64) -> Vector3 {
        let (sa, ca) = azimuth.sin_cos();
        let (se, ce) = elevation.sin_cos();
        Vector3::new(ce * ca, ce * sa, se)
    }
}

impl Add for Vector3 {
    type Output = Vector3;
    fn add(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vector3 {
    fn add_assign(&mut self, o: Vector3) {
        *self = *self + o;
    }
}

impl Sub for Vector3 {
    type Output = Vector3;
    fn sub(self, o: Vector3) -> Vector3 {
        Vector3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vector3 {
    type Output = Vector3;
    fn mul(self, s: f64) -> Vector3 {
        Vector3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vector3 {
    type Output = Vector3;
    fn neg(self) -> Vector3 {
        Vector3::new(-self.x, -self.y, -self.z)
    }
}

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_two_pi(angle: f64) -> f64 {
    let a = angle.rem_euclid(TAU);
    if a >= TAU {
        0.0
    } else {
        a
    }
}

/// Azimuth/elevation pair in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnglePair {
    azimuth: f64,
    elevation: f64,
}

impl AnglePair {
    /// Azimuth is wrapped to `[0, 2π)`; elevation must lie in `[-π/2, π/2]`.
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self, GeometryError> {
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&elevation) {
            return Err(GeometryError::ElevationOutOfRange(elevation));
        }
        Ok(Self {
            azimuth: wrap_two_pi(azimuth),
            elevation,
        })
    }

    /// Fold an arbitrary (azimuth, elevation) onto the sphere: elevations past
    /// a pole continue over it and flip the azimuth by π.
    pub fn folded(azimuth: f64, elevation: f64) -> Self {
        // bring elevation into (-π, π]
        let mut el = elevation.rem_euclid(TAU);
        if el > std::f64::consts::PI {
            el -= TAU;
        }
        let mut az = azimuth;
        if el > FRAC_PI_2 {
            el = std::f64::consts::PI - el;
            az += std::f64::consts::PI;
        } else if el < -FRAC_PI_2 {
            el = -std::f64::consts::PI - el;
            az += std::f64::consts::PI;
        }
        Self {
            azimuth: wrap_two_pi(az),
            elevation: el,
        }
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    pub fn unit_vector(&self) -> Vector3 {
        Vector3::from_angles(self.azimuth, self.elevation)
    }
}

/// Cartesian to spherical: returns the direction angles and the length.
pub fn cart_to_sph(v: Vector3) -> Result<(AnglePair, f64), GeometryError> {
    let r = v.norm();
    if r < ZERO_VECTOR_EPS {
        return Err(GeometryError::ZeroVector);
    }
    let azimuth = wrap_two_pi(v.y.atan2(v.x));
    let elevation = (v.z / r).clamp(-1.0, 1.0).asin();
    Ok((
        AnglePair {
            azimuth,
            elevation,
        },
        r,
    ))
}

pub fn sph_to_cart(angles: AnglePair, r: f64) -> Vector3 {
    angles.unit_vector() * r
}

/// Angle between two directions given by their spherical angles, in `[0, π]`.
pub fn angle_between(x: AnglePair, y: AnglePair) -> f64 {
    let c = x.elevation.cos() * y.elevation.cos() * (x.azimuth - y.azimuth).cos()
        + x.elevation.sin() * y.elevation.sin();
    c.clamp(-1.0, 1.0).acos()
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMatrix(pub [[f64; 3]; 3]);

impl FrameMatrix {
    pub const IDENTITY: FrameMatrix =
        FrameMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn from_columns(c0: Vector3, c1: Vector3, c2: Vector3) -> Self {
        FrameMatrix([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn column(&self, k: usize) -> Vector3 {
        let m = &self.0;
        Vector3::new(m[0][k], m[1][k], m[2][k])
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse by the adjugate formula.
    pub fn inverse(&self) -> Result<FrameMatrix, GeometryError> {
        let det = self.determinant();
        if det.abs() < SINGULAR_DET_EPS {
            return Err(GeometryError::SingularFrame(det));
        }
        let m = &self.0;
        let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
            m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]
        };
        let inv_det = 1.0 / det;
        // adj[i][j] = cofactor[j][i]
        let adj = [
            [cof(1, 2, 1, 2), -cof(0, 2, 1, 2), cof(0, 1, 1, 2)],
            [-cof(1, 2, 0, 2), cof(0, 2, 0, 2), -cof(0, 1, 0, 2)],
            [cof(1, 2, 0, 1), -cof(0, 2, 0, 1), cof(0, 1, 0, 1)],
        ];
        let mut out = [[0.0; 3]; 3];
        for (i, row) in adj.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                out[i][j] = v * inv_det;
            }
        }
        Ok(FrameMatrix(out))
    }

    pub fn apply(&self, v: Vector3) -> Vector3 {
        let m = &self.0;
        Vector3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    pub fn mul(&self, other: &FrameMatrix) -> FrameMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[i][k] * other.0[k][j]).sum();
            }
        }
        FrameMatrix(out)
    }
}

/// Orientation of the LED array: azimuth/elevation of the row direction
/// (`β_V`) and of the column direction (`β_H`), radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayOrientation {
    pub row_azimuth: f64,
    pub row_elevation: f64,
    pub column_azimuth: f64,
    pub column_elevation: f64,
}

impl Default for ArrayOrientation {
    /// Array in the `yz` plane facing `+x`, rows along `+y`, columns along `+z`.
    fn default() -> Self {
        Self {
            row_azimuth: FRAC_PI_2,
            row_elevation: 0.0,
            column_azimuth: std::f64::consts::PI,
            column_elevation: FRAC_PI_2,
        }
    }
}

impl ArrayOrientation {
    /// Unit vector along a row (direction of increasing column index `j`).
    pub fn row_direction(&self) -> Vector3 {
        Vector3::from_angles(self.row_azimuth, self.row_elevation)
    }

    /// Unit vector along a column (direction of increasing row index `i`).
    pub fn column_direction(&self) -> Vector3 {
        Vector3::from_angles(self.column_azimuth, self.column_elevation)
    }
}

/// Transition matrix from the GCS to the LCS of `L11`.
///
/// Columns are the element normal (row × column direction), the row
/// direction and the column direction. LCS coordinates are obtained by
/// multiplying GCS coordinates with the inverse.
pub fn gcs_to_lcs11(o: &ArrayOrientation) -> Result<FrameMatrix, GeometryError> {
    let (sva, cva) = o.row_azimuth.sin_cos();
    let (sve, cve) = o.row_elevation.sin_cos();
    let (sha, cha) = o.column_azimuth.sin_cos();
    let (she, che) = o.column_elevation.sin_cos();
    let m = FrameMatrix([
        [cve * sva * she - sve * che * sha, cve * cva, che * cha],
        [sve * che * cha - cve * cva * she, cve * sva, che * sha],
        [cve * che * (o.column_azimuth - o.row_azimuth).sin(), sve, she],
    ]);
    let det = m.determinant();
    if det.abs() < SINGULAR_DET_EPS {
        return Err(GeometryError::SingularFrame(det));
    }
    Ok(m)
}

/// Transition matrix from the GCS to the LCS of a receiver whose top PD
/// normal has the given azimuth/elevation. The third column is that normal.
pub fn gcs_to_lcs_pd(azimuth: f64, elevation: f64) -> FrameMatrix {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    FrameMatrix([
        [sa, se * ca, ce * ca],
        [-ca, se * sa, ce * sa],
        [0.0, -ce, se],
    ])
}

/// Planar LED array layout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Spacing between rows (`δ_H`), meters.
    pub spacing_h: f64,
    /// Spacing between columns (`δ_V`), meters.
    pub spacing_v: f64,
    pub orientation: ArrayOrientation,
}

impl ArrayGeometry {
    fn check_index(&self, row: usize, col: usize) -> Result<(), GeometryError> {
        if row >= self.rows || col >= self.cols {
            return Err(GeometryError::IndexOutOfRange {
                row,
                col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(())
    }

    /// Precompute the inverse frame used for per-element angle queries.
    pub fn frame(&self) -> Result<ArrayFrame, GeometryError> {
        let to_lcs = gcs_to_lcs11(&self.orientation)?;
        Ok(ArrayFrame {
            geometry: *self,
            inverse: to_lcs.inverse()?,
        })
    }
}

/// GCS position of element `(row, col)` (zero-based).
pub fn led_position(row: usize, col: usize, geometry: &ArrayGeometry) -> Vector3 {
    let dv = col as f64 * geometry.spacing_v;
    let dh = row as f64 * geometry.spacing_h;
    geometry.orientation.row_direction() * dv + geometry.orientation.column_direction() * dh
}

/// Cached inverse of the `L11` frame.
#[derive(Debug, Clone, Copy)]
pub struct ArrayFrame {
    geometry: ArrayGeometry,
    inverse: FrameMatrix,
}

impl ArrayFrame {
    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    /// Cartesian coordinates of a GCS point in the LCS of element `(row, col)`.
    pub fn to_element_local(&self, p: Vector3, row: usize, col: usize) -> Vector3 {
        let local = self.inverse.apply(p);
        local
            - Vector3::new(
                0.0,
                col as f64 * self.geometry.spacing_v,
                row as f64 * self.geometry.spacing_h,
            )
    }

    /// Direction angles of `p` as seen in the LCS of element `(row, col)`.
    pub fn angles_in_element(
        &self,
        p: Vector3,
        row: usize,
        col: usize,
    ) -> Result<AnglePair, GeometryError> {
        cart_to_sph(self.to_element_local(p, row, col)).map(|(a, _)| a)
    }
}

/// Angles of a GCS point in the LCS of element `(row, col)` (zero-based).
pub fn point_to_lcs_ij(
    p: Vector3,
    row: usize,
    col: usize,
    geometry: &ArrayGeometry,
) -> Result<AnglePair, GeometryError> {
    geometry.check_index(row, col)?;
    geometry.frame()?.angles_in_element(p, row, col)
}

/// Receiver orientation and rotation. Angles in radians, rates in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverOrientation {
    pub azimuth: f64,
    pub elevation: f64,
    /// Number of photodiodes: one top PD plus `pd_count - 1` side PDs.
    pub pd_count: usize,
    /// Tilt of the side PDs away from the top PD normal.
    pub inclination: f64,
    pub azimuth_rate: f64,
    pub elevation_rate: f64,
}

impl ReceiverOrientation {
    /// GCS (azimuth, elevation) of every PD normal at `t = 0`. Index 0 is the
    /// top PD; side PDs follow in order of their LCS azimuth.
    pub fn initial_pd_angles(&self) -> Result<Vec<(f64, f64)>, GeometryError> {
        if self.pd_count == 0 {
            return Err(GeometryError::InvalidAdr("at least one PD is required".into()));
        }
        let mut out = vec![(self.azimuth, self.elevation)];
        if self.pd_count == 1 {
            return Ok(out);
        }
        if !(self.inclination > 0.0 && self.inclination < FRAC_PI_2) {
            return Err(GeometryError::InvalidAdr(format!(
                "side PD inclination {} rad is outside (0, π/2)",
                self.inclination
            )));
        }
        let to_gcs = gcs_to_lcs_pd(self.azimuth, self.elevation);
        let sides = self.pd_count - 1;
        let gamma = FRAC_PI_2 - self.inclination;
        for p in 0..sides {
            let omega = TAU * p as f64 / sides as f64;
            let n = to_gcs.apply(Vector3::from_angles(omega, gamma));
            let (a, _) = cart_to_sph(n)?;
            out.push((a.azimuth(), a.elevation()));
        }
        Ok(out)
    }
}

/// Unit normals of every PD at time `t`, with both orientation angles of
/// each PD advanced linearly by the rotation rates.
pub fn adr_pd_normals(rx: &ReceiverOrientation, t: f64) -> Result<Vec<Vector3>, GeometryError> {
    Ok(rx
        .initial_pd_angles()?
        .into_iter()
        .map(|(az, el)| Vector3::from_angles(az + rx.azimuth_rate * t, el + rx.elevation_rate * t))
        .collect())
}

/// Equivalent normal of a cluster centered at distance `distance` and
/// angles (`azimuth`, `elevation`) from `L11`, with the receiver initially on
/// the `+x` axis. The normal is perpendicular to the `L11`-receiver axis and
/// points from the cluster center toward it.
pub fn cluster_equivalent_normal(
    distance: f64,
    azimuth: f64,
    elevation: f64,
) -> Result<Vector3, GeometryError> {
    let center = Vector3::from_angles(azimuth, elevation) * distance;
    let offset = Vector3::new(0.0, center.y, center.z);
    if offset.norm() < 1e-12 * distance.abs().max(1.0) {
        return Err(GeometryError::DegenerateNormal);
    }
    Ok(-(offset.normalized()?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn vclose(a: Vector3, b: Vector3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn cart_to_sph_axis_cases() {
        let (a, r) = cart_to_sph(Vector3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!((a.azimuth(), a.elevation(), r), (0.0, 0.0, 1.0));
        let (a, r) = cart_to_sph(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        assert!(close(a.azimuth(), 0.0, 1e-15) && close(a.elevation(), FRAC_PI_2, 1e-15));
        assert_eq!(r, 1.0);
        let (a, r) = cart_to_sph(Vector3::new(1.0, 1.0, 0.0)).unwrap();
        assert!(close(a.azimuth(), FRAC_PI_4, 1e-15));
        assert!(close(r, SQRT_2, 1e-15));
        assert_eq!(cart_to_sph(Vector3::ZERO), Err(GeometryError::ZeroVector));
    }

    #[test]
    fn sph_to_cart_cases() {
        let v = sph_to_cart(AnglePair::new(0.0, 0.0).unwrap(), 2.0);
        assert!(vclose(v, Vector3::new(2.0, 0.0, 0.0), 1e-15));
        let v = sph_to_cart(AnglePair::new(PI, 0.0).unwrap(), 1.0);
        assert!(vclose(v, Vector3::new(-1.0, 0.0, 0.0), 1e-15));
        let v = sph_to_cart(AnglePair::new(FRAC_PI_2, FRAC_PI_4).unwrap(), SQRT_2);
        assert!(vclose(v, Vector3::new(0.0, 1.0, 1.0), 1e-15));
    }

    #[test]
    fn angle_pair_validation() {
        assert!(AnglePair::new(0.0, 1.6).is_err());
        let a = AnglePair::new(-FRAC_PI_2, 0.0).unwrap();
        assert!(close(a.azimuth(), 1.5 * PI, 1e-15));
        let f = AnglePair::folded(0.0, PI * 0.75);
        assert!(close(f.elevation(), PI * 0.25, 1e-15));
        assert!(close(f.azimuth(), PI, 1e-15));
        assert!(vclose(f.unit_vector(), Vector3::from_angles(0.0, PI * 0.75), 1e-15));
    }

    #[test]
    fn angle_between_cases() {
        let x = AnglePair::new(0.3, 0.2).unwrap();
        assert!(close(angle_between(x, x), 0.0, 1e-7));
        let a = AnglePair::new(0.0, 0.0).unwrap();
        let b = AnglePair::new(FRAC_PI_2, 0.0).unwrap();
        assert!(close(angle_between(a, b), FRAC_PI_2, 1e-15));
        let a = AnglePair::new(0.0, FRAC_PI_4).unwrap();
        let b = AnglePair::new(PI, FRAC_PI_4).unwrap();
        assert!(close(angle_between(a, b), FRAC_PI_2, 1e-15));
    }

    #[test]
    fn default_orientation_gives_identity_frame() {
        let m = gcs_to_lcs11(&ArrayOrientation::default()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(m.0[i][j], want, 1e-15), "entry {i}{j} = {}", m.0[i][j]);
            }
        }
    }

    #[test]
    fn parallel_row_and_column_is_singular() {
        let o = ArrayOrientation {
            row_azimuth: 0.4,
            row_elevation: 0.1,
            column_azimuth: 0.4,
            column_elevation: 0.1,
        };
        assert!(matches!(gcs_to_lcs11(&o), Err(GeometryError::SingularFrame(_))));
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let m = FrameMatrix([[2.0, 0.5, 0.1], [0.3, 1.0, -0.2], [0.0, 0.4, 3.0]]);
        let p = m.mul(&m.inverse().unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!(close(p.0[i][j], want, 1e-14));
            }
        }
    }

    fn default_geometry(spacing: f64) -> ArrayGeometry {
        ArrayGeometry {
            rows: 4,
            cols: 4,
            spacing_h: spacing,
            spacing_v: spacing,
            orientation: ArrayOrientation::default(),
        }
    }

    #[test]
    fn led_positions_at_default_orientation() {
        let g = default_geometry(1.0);
        assert!(vclose(led_position(0, 0, &g), Vector3::ZERO, 0.0));
        assert!(vclose(led_position(0, 1, &g), Vector3::new(0.0, 1.0, 0.0), 1e-15));
        assert!(vclose(led_position(1, 0, &g), Vector3::new(0.0, 0.0, 1.0), 1e-15));
    }

    #[test]
    fn point_to_lcs_cases() {
        let g = default_geometry(1.0);
        let a = point_to_lcs_ij(Vector3::new(0.0, 0.0, -2.0), 0, 0, &g).unwrap();
        assert!(close(a.elevation(), -FRAC_PI_2, 1e-15));
        let p = Vector3::new(1.3, -0.4, 0.7);
        let base = point_to_lcs_ij(p, 0, 0, &g).unwrap();
        let shifted = point_to_lcs_ij(p + led_position(1, 0, &g), 1, 0, &g).unwrap();
        assert!(close(base.azimuth(), shifted.azimuth(), 1e-14));
        assert!(close(base.elevation(), shifted.elevation(), 1e-14));
        assert_eq!(
            point_to_lcs_ij(led_position(2, 3, &g), 2, 3, &g),
            Err(GeometryError::ZeroVector)
        );
        assert!(matches!(
            point_to_lcs_ij(p, 4, 0, &g),
            Err(GeometryError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn adr_normals() {
        let single = ReceiverOrientation {
            azimuth: PI,
            elevation: 0.0,
            pd_count: 1,
            inclination: 0.0,
            azimuth_rate: 0.0,
            elevation_rate: 0.0,
        };
        let n = adr_pd_normals(&single, 0.0).unwrap();
        assert_eq!(n.len(), 1);
        assert!(vclose(n[0], Vector3::new(-1.0, 0.0, 0.0), 1e-15));

        // the LCS normals of the side PDs for omega = 0 and pi
        let h = SQRT_2 / 2.0;
        let side0 = Vector3::from_angles(0.0, FRAC_PI_2 - FRAC_PI_4);
        let side1 = Vector3::from_angles(PI, FRAC_PI_2 - FRAC_PI_4);
        assert!(vclose(side0, Vector3::new(h, 0.0, h), 1e-15));
        assert!(vclose(side1, Vector3::new(-h, 0.0, h), 1e-15));

        // top PD pointing +z: the LCS frame is a pure rotation about z
        let adr = ReceiverOrientation {
            azimuth: 0.0,
            elevation: FRAC_PI_2,
            pd_count: 3,
            inclination: FRAC_PI_4,
            azimuth_rate: 0.0,
            elevation_rate: 0.0,
        };
        let n = adr_pd_normals(&adr, 0.0).unwrap();
        assert_eq!(n.len(), 3);
        for side in &n[1..] {
            assert!(close(side.z, h, 1e-15));
            assert!(close(side.norm(), 1.0, 1e-15));
        }
        assert!(close(n[1].dot(n[2]), 0.0, 1e-15));

        let bad = ReceiverOrientation {
            inclination: FRAC_PI_2,
            ..adr
        };
        assert!(matches!(adr_pd_normals(&bad, 0.0), Err(GeometryError::InvalidAdr(_))));
    }

    #[test]
    fn rotation_advances_azimuth() {
        let rx = ReceiverOrientation {
            azimuth: PI,
            elevation: 0.2,
            pd_count: 3,
            inclination: 0.5,
            azimuth_rate: FRAC_PI_4,
            elevation_rate: 0.0,
        };
        let before = adr_pd_normals(&rx, 0.0).unwrap();
        let after = adr_pd_normals(&rx, 2.0).unwrap();
        for (b, a) in before.iter().zip(&after) {
            let (ab, _) = cart_to_sph(*b).unwrap();
            let (aa, _) = cart_to_sph(*a).unwrap();
            let d = wrap_two_pi(aa.azimuth() - ab.azimuth());
            assert!(close(d, FRAC_PI_2, 1e-12), "advance {d}");
            assert!(close(aa.elevation(), ab.elevation(), 1e-12));
        }
    }

    #[test]
    fn cluster_normal_cases() {
        let n = cluster_equivalent_normal(1.5, FRAC_PI_2, 0.0).unwrap();
        let (a, _) = cart_to_sph(n).unwrap();
        assert!(close(a.azimuth(), 1.5 * PI, 1e-15));
        assert!(close(a.elevation(), 0.0, 1e-15));
        assert_eq!(
            cluster_equivalent_normal(1.0, 0.0, 0.0),
            Err(GeometryError::DegenerateNormal)
        );
        // angle-form construction: the foot of the perpendicular on the
        // axis sits at the same x, so the azimuth argument diverges
        for &(d, az, el) in &[(2.0, 0.7, 0.3), (1.1, 4.0, -0.9), (3.0, 2.5, 1.2), (0.4, 5.9, 0.05)] {
            let (sa, ca) = f64::sin_cos(az);
            let (se, ce) = f64::sin_cos(el);
            let c = Vector3::new(d * ce * ca, d * ce * sa, d * se);
            let d_tmp = c.x;
            let beta_a = TAU - (c.y / (d_tmp - c.x)).atan();
            let el_den = ((d * ce).powi(2) + d_tmp * d_tmp - 2.0 * d * ce * d_tmp * ca).sqrt();
            let beta_e = -(c.z / el_den).atan();
            let want = Vector3::from_angles(beta_a, beta_e);
            let got = cluster_equivalent_normal(d, az, el).unwrap();
            assert!(vclose(got, want, 1e-6), "{got:?} vs {want:?}");
        }
        // directly above the axis
        let n = cluster_equivalent_normal(1.0, 0.0, FRAC_PI_2).unwrap();
        assert!(vclose(n, Vector3::new(0.0, 0.0, -1.0), 1e-15));
    }
}
