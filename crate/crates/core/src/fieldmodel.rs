//! Static flux density of infinite DC wires and the geomagnetic residual.

use nalgebra::Vector3;
use rand::Rng;

use crate::body::BodyModel;
use crate::geometry::{Axis, Wire, WireSet};
use crate::{Error, Result, MU_0};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frame {
    World,
    Sensor,
}

/// Magnetic flux density in tesla.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldVector {
    pub b: Vector3<f64>,
    pub frame: Frame,
}

impl FieldVector {
    pub fn world(b: Vector3<f64>) -> Self {
        FieldVector {
            b,
            frame: Frame::World,
        }
    }

    pub fn zero() -> Self {
        FieldVector::world(Vector3::zeros())
    }

    pub fn magnitude(&self) -> f64 {
        self.b.norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Permeability(f64);

impl Permeability {
    pub fn new(mu: f64) -> Result<Self> {
        if mu.is_finite() && mu > 0.0 {
            Ok(Permeability(mu))
        } else {
            Err(Error::Config(format!(
                "permeability must be positive, got {mu}"
            )))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Permeability {
    fn default() -> Self {
        Permeability(MU_0)
    }
}

/// Maps the (northern, eastern, vertical) residual components onto world
/// axes. The default sends northern to x, eastern to y, vertical to z.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EarthFrameMapping(pub [Axis; 3]);

impl Default for EarthFrameMapping {
    fn default() -> Self {
        EarthFrameMapping([Axis::X, Axis::Y, Axis::Z])
    }
}

impl EarthFrameMapping {
    pub fn new(axes: [Axis; 3]) -> Result<Self> {
        let mut seen = [false; 3];
        for a in axes {
            if std::mem::replace(&mut seen[a.index()], true) {
                return Err(Error::Config(format!(
                    "earth mapping must be a permutation of x, y, z, got {axes:?}"
                )));
            }
        }
        Ok(EarthFrameMapping(axes))
    }
}

/// Half-widths (tesla) of the uniform residual left after subtracting the
/// geomagnetic model: northern, eastern and vertical components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EarthResidualBounds {
    pub north: f64,
    pub east: f64,
    pub vertical: f64,
    pub mapping: EarthFrameMapping,
}

impl EarthResidualBounds {
    pub fn new(north: f64, east: f64, vertical: f64) -> Result<Self> {
        for v in [north, east, vertical] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Config(format!(
                    "earth residual bounds must be non-negative, got {v}"
                )));
            }
        }
        Ok(EarthResidualBounds {
            north,
            east,
            vertical,
            mapping: EarthFrameMapping::default(),
        })
    }

    pub fn zero() -> Self {
        EarthResidualBounds::new(0.0, 0.0, 0.0).unwrap()
    }

    pub fn with_mapping(mut self, mapping: EarthFrameMapping) -> Self {
        self.mapping = mapping;
        self
    }

    /// Bounds as nanotesla (north, east, vertical).
    pub fn nanotesla(&self) -> [f64; 3] {
        [self.north * 1e9, self.east * 1e9, self.vertical * 1e9]
    }
}

impl Default for EarthResidualBounds {
    /// Mean of the 2020 and 2025 model error estimates: 131, 94, 157 nT.
    fn default() -> Self {
        EarthResidualBounds::new(131e-9, 94e-9, 157e-9).unwrap()
    }
}

/// Flux density of `wire` at `point` (Biot-Savart, infinite line).
///
/// Magnitude is `mu I / (2 pi R)`; the direction is `axis x radial`.
pub fn flux_density_at(wire: &Wire, point: &Vector3<f64>, mu: Permeability) -> Result<FieldVector> {
    let radial = wire.radial(point);
    let r2 = radial.norm_squared();
    if r2 == 0.0 || !r2.is_finite() {
        return Err(Error::OnWireAxis { wire: 0 });
    }
    let k = mu.0 * wire.current() / (2.0 * std::f64::consts::PI * r2);
    // axis x radial, with the radial vector confined to the perpendicular plane
    let direction = wire.axis().unit().cross(&radial);
    Ok(FieldVector::world(direction * k))
}

/// Magnitude-only shortcut used by the saturation sweep.
pub fn flux_magnitude(current: f64, distance: f64, mu: Permeability) -> f64 {
    mu.0 * current / (2.0 * std::f64::consts::PI * distance)
}

/// One residual draw; each component uniform on its own half-width.
pub fn earth_residual<R: Rng + ?Sized>(bounds: &EarthResidualBounds, rng: &mut R) -> FieldVector {
    let mut b = Vector3::zeros();
    let halves = [bounds.north, bounds.east, bounds.vertical];
    for (half, axis) in halves.into_iter().zip(bounds.mapping.0) {
        let u: f64 = rng.random();
        b[axis.index()] = half * (2.0 * u - 1.0);
    }
    FieldVector::world(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaturationReport {
    pub max_field: f64,
    pub worst_voxel: Vector3<f64>,
    pub worst_wire: usize,
    pub limit: f64,
    pub ok: bool,
}

pub const DEFAULT_SATURATION_LIMIT: f64 = 0.12;

/// Largest single-wire field magnitude over every voxel of `body`.
///
/// A voxel sitting on a wire axis yields an infinite maximum and `ok = false`.
pub fn validate_saturation(
    wireset: &WireSet,
    body: &BodyModel,
    limit: f64,
    mu: Permeability,
) -> Result<SaturationReport> {
    if wireset.is_empty() {
        return Err(Error::InvalidWireSet("no wires".into()));
    }
    let voxels = body.voxels();
    if voxels.is_empty() {
        return Err(Error::EmptyBody);
    }
    let mut report = SaturationReport {
        max_field: 0.0,
        worst_voxel: voxels[0],
        worst_wire: 0,
        limit,
        ok: true,
    };
    for (wi, wire) in wireset.wires().iter().enumerate() {
        for v in voxels {
            let d = crate::geometry::wire_distance(wire, v);
            let b = if d > 0.0 {
                flux_magnitude(wire.current(), d, mu)
            } else {
                f64::INFINITY
            };
            if b > report.max_field {
                report.max_field = b;
                report.worst_voxel = *v;
                report.worst_wire = wi;
            }
        }
    }
    report.ok = report.max_field <= limit;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Axis;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z_wire(current: f64) -> Wire {
        Wire::new(Axis::Z, [0.0, 0.0], current).unwrap()
    }

    #[test]
    fn right_hand_rule_examples() {
        let mu = Permeability::default();
        let b = flux_density_at(&z_wire(100.0), &Vector3::new(0.5, 0.0, 0.0), mu).unwrap();
        assert!((b.b - Vector3::new(0.0, 4e-5, 0.0)).amax() < 1e-18);
        let b = flux_density_at(&z_wire(100.0), &Vector3::new(0.0, 0.5, 0.0), mu).unwrap();
        assert!((b.b - Vector3::new(-4e-5, 0.0, 0.0)).amax() < 1e-18);
    }

    #[test]
    fn saturation_radius() {
        // invert B = mu I / (2 pi R) by bisection on the forward model
        let mu = Permeability::default();
        let (mut lo, mut hi) = (1e-6, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if flux_magnitude(100.0, mid, mu) > 0.12 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 1.6667e-4).abs() < 1e-8, "{lo}");
    }

    #[test]
    fn on_axis_is_an_error() {
        let w = Wire::new(Axis::X, [0.2, 0.3], 10.0).unwrap();
        assert!(matches!(
            flux_density_at(&w, &Vector3::new(4.0, 0.2, 0.3), Permeability::default()),
            Err(Error::OnWireAxis { .. })
        ));
    }

    #[test]
    fn field_is_azimuthal() {
        let mu = Permeability::default();
        for axis in Axis::ALL {
            let w = Wire::new(axis, [0.1, -0.4], 50.0).unwrap();
            let p = Vector3::new(0.7, 0.2, -0.3);
            let b = flux_density_at(&w, &p, mu).unwrap().b;
            let n = b / b.norm();
            assert!(n.dot(&axis.unit()).abs() < 1e-15);
            let r = w.radial(&p);
            assert!(n.dot(&(r / r.norm())).abs() < 1e-15);
        }
    }

    #[test]
    fn residual_within_bounds_and_zero_when_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bounds = EarthResidualBounds::default();
        for _ in 0..10_000 {
            let r = earth_residual(&bounds, &mut rng).b;
            assert!(r.x.abs() <= 131e-9 && r.y.abs() <= 94e-9 && r.z.abs() <= 157e-9);
        }
        let r = earth_residual(&EarthResidualBounds::zero(), &mut rng);
        assert_eq!(r.b, Vector3::zeros());
        assert_eq!(r.frame, Frame::World);
    }

    #[test]
    fn residual_mean_is_centered() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let bounds = EarthResidualBounds::default();
        let n = 1_000_000;
        let sum: f64 = (0..n).map(|_| earth_residual(&bounds, &mut rng).b.x).sum();
        assert!((sum / n as f64).abs() < 0.5e-9);
    }

    #[test]
    fn residual_mapping_permutes_axes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mapping = EarthFrameMapping::new([Axis::Z, Axis::X, Axis::Y]).unwrap();
        let bounds = EarthResidualBounds::new(0.0, 0.0, 1e-6)
            .unwrap()
            .with_mapping(mapping);
        let r = earth_residual(&bounds, &mut rng).b;
        assert_eq!(r.x, 0.0);
        assert_eq!(r.z, 0.0);
        assert!(r.y != 0.0);
        assert!(EarthFrameMapping::new([Axis::X, Axis::X, Axis::Y]).is_err());
    }
}
