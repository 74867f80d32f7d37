//! Image-source geometry and the horn antenna model.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::PathKind;
use crate::error::{Error, Result};

pub type Point = Vector3<f64>;

/// Rectangular planar reflector `origin + a * edge_u + b * edge_v`, `a, b` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    pub kind: PathKind,
    pub origin: [f64; 3],
    pub edge_u: [f64; 3],
    pub edge_v: [f64; 3],
    /// Power loss of one bounce, dB.
    pub loss_db: f64,
}

/// Specular bounce found by the image-source method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounce {
    pub image: Point,
    pub point: Point,
    /// Total unfolded path length, m.
    pub length: f64,
}

impl Reflector {
    pub fn validate(&self) -> Result<()> {
        let u = Vector3::from(self.edge_u);
        let v = Vector3::from(self.edge_v);
        if u.norm() == 0.0 || v.norm() == 0.0 {
            return Err(Error::config("reflector", "edges must be non-zero"));
        }
        if u.dot(&v).abs() > 1e-9 * u.norm() * v.norm() {
            return Err(Error::config("reflector", "edges must be orthogonal"));
        }
        Ok(())
    }

    pub fn normal(&self) -> Point {
        Vector3::from(self.edge_u)
            .cross(&Vector3::from(self.edge_v))
            .normalize()
    }

    /// Mirror of `p` across the reflector plane.
    pub fn mirror(&self, p: &Point) -> Point {
        let n = self.normal();
        p - 2.0 * (p - Vector3::from(self.origin)).dot(&n) * n
    }

    /// Reflects a direction (velocity) across the plane.
    pub fn mirror_direction(&self, d: &Point) -> Point {
        let n = self.normal();
        d - 2.0 * d.dot(&n) * n
    }

    /// Single-bounce path from `tx` to `rx`, if the specular point lies on the rectangle.
    pub fn bounce(&self, tx: &Point, rx: &Point) -> Option<Bounce> {
        let o = Vector3::from(self.origin);
        let n = self.normal();
        let side_tx = (tx - o).dot(&n);
        let side_rx = (rx - o).dot(&n);
        if side_tx * side_rx <= 0.0 {
            return None;
        }
        let image = self.mirror(tx);
        let dir = rx - image;
        let denom = dir.dot(&n);
        if denom == 0.0 {
            return None;
        }
        let s = (o - image).dot(&n) / denom;
        if !(0.0..=1.0).contains(&s) {
            return None;
        }
        let point = image + s * dir;
        let u = Vector3::from(self.edge_u);
        let v = Vector3::from(self.edge_v);
        let a = (point - o).dot(&u) / u.norm_squared();
        let b = (point - o).dot(&v) / v.norm_squared();
        if !((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b)) {
            return None;
        }
        Some(Bounce {
            image,
            point,
            length: dir.norm(),
        })
    }
}

/// Horn main lobe, Gaussian in dB, clamped at a side-lobe floor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamPattern {
    /// Up-tilt of the boresight above the horizon, degrees.
    pub boresight_elevation: f64,
    pub gain_dbi: f64,
    /// Full 3 dB beamwidth, degrees.
    pub beamwidth: f64,
    pub floor_dbi: f64,
}

impl BeamPattern {
    pub fn horn(boresight_elevation: f64) -> Self {
        Self {
            boresight_elevation,
            gain_dbi: 20.0,
            beamwidth: 15.0,
            floor_dbi: -10.0,
        }
    }
}

fn unit_from_angles(azimuth_deg: f64, elevation_deg: f64) -> Point {
    let (az, el) = (azimuth_deg.to_radians(), elevation_deg.to_radians());
    Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
}

/// Gain in dBi towards (`azimuth`, `elevation`), both in degrees relative to
/// the driving direction and the horizon.
pub fn horn_gain(b: &BeamPattern, azimuth: f64, elevation: f64) -> f64 {
    let dir = unit_from_angles(azimuth, elevation);
    let boresight = unit_from_angles(0.0, b.boresight_elevation);
    let off = dir.dot(&boresight).clamp(-1.0, 1.0).acos().to_degrees();
    let main = b.gain_dbi - 3.0 * (off / (b.beamwidth / 2.0)).powi(2);
    main.max(b.floor_dbi)
}

/// Azimuth and elevation (degrees) of `dir` in the frame of a vehicle heading along `heading`.
pub fn local_angles(dir: &Point, heading: &Point) -> (f64, f64) {
    let up = Vector3::z();
    let mut fwd = Vector3::new(heading.x, heading.y, 0.0);
    if fwd.norm() == 0.0 {
        fwd = Vector3::x();
    }
    let fwd = fwd.normalize();
    let left = up.cross(&fwd);
    let d = dir.normalize();
    let az = d.dot(&left).atan2(d.dot(&fwd)).to_degrees();
    let el = d.z.clamp(-1.0, 1.0).asin().to_degrees();
    (az, el)
}
