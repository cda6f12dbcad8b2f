//! Tri-axial Hall magnetometer: frame rotation, relative noise, magnitude.

use std::str::FromStr;

use nalgebra::Vector3;
use rand::Rng;

use crate::fieldmodel::FieldVector;
use crate::geometry::Rotation;
use crate::{Error, Result};

/// Where the relative error is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseBasis {
    /// Each sensor-frame component gets its own relative perturbation.
    Component,
    /// One relative perturbation of the combined magnitude.
    #[default]
    Magnitude,
}

impl FromStr for NoiseBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "component" => Ok(NoiseBasis::Component),
            "magnitude" => Ok(NoiseBasis::Magnitude),
            other => Err(Error::Config(format!(
                "noise_basis must be \"component\" or \"magnitude\", got {other:?}"
            ))),
        }
    }
}

impl NoiseBasis {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseBasis::Component => "component",
            NoiseBasis::Magnitude => "magnitude",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagnetometerSpec {
    rel_error: f64,
    range_max: f64,
    noise_basis: NoiseBasis,
}

impl MagnetometerSpec {
    pub fn new(rel_error: f64, range_max: f64, noise_basis: NoiseBasis) -> Result<Self> {
        if !(rel_error.is_finite() && (0.0..1.0).contains(&rel_error)) {
            return Err(Error::Config(format!(
                "rel_error must be in [0, 1), got {rel_error}"
            )));
        }
        if !(range_max.is_finite() && range_max > 0.0) {
            return Err(Error::Config(format!(
                "range_max must be positive, got {range_max}"
            )));
        }
        Ok(MagnetometerSpec {
            rel_error,
            range_max,
            noise_basis,
        })
    }

    pub fn noiseless() -> Self {
        MagnetometerSpec::new(0.0, 0.12, NoiseBasis::Component).unwrap()
    }

    pub fn rel_error(&self) -> f64 {
        self.rel_error
    }

    pub fn range_max(&self) -> f64 {
        self.range_max
    }

    pub fn noise_basis(&self) -> NoiseBasis {
        self.noise_basis
    }
}

impl Default for MagnetometerSpec {
    /// 1 % relative error of the magnitude over a 0-120 mT range.
    fn default() -> Self {
        MagnetometerSpec::new(0.01, 0.12, NoiseBasis::Magnitude).unwrap()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub magnitude: f64,
    pub saturated: bool,
}

fn relative_draw<R: Rng + ?Sized>(rel_error: f64, rng: &mut R) -> f64 {
    if rel_error == 0.0 {
        return 1.0;
    }
    let u: f64 = rng.random();
    1.0 + rel_error * (2.0 * u - 1.0)
}

/// One reading of the triad for a single active wire.
///
/// The residual is added in the world frame, the sum is rotated into the
/// sensor frame, out-of-range components are clipped and flagged, and the
/// Euclidean magnitude is returned. The uniform relative error goes on each
/// component before clipping, or on the magnitude after it, depending on
/// [`MagnetometerSpec::noise_basis`].
pub fn measure<R: Rng + ?Sized>(
    true_field: &FieldVector,
    residual: &FieldVector,
    orientation: &Rotation,
    spec: &MagnetometerSpec,
    rng: &mut R,
) -> Measurement {
    let world = true_field.b + residual.b;
    let sensor = orientation.apply_inverse(&world);
    let saturated = sensor.iter().any(|c| c.abs() > spec.range_max);

    let noisy = match spec.noise_basis {
        NoiseBasis::Component => sensor.map(|c| c * relative_draw(spec.rel_error, rng)),
        NoiseBasis::Magnitude => sensor,
    };
    let clipped: Vector3<f64> = noisy.map(|c| c.clamp(-spec.range_max, spec.range_max));
    let mut magnitude = clipped.norm();
    if spec.noise_basis == NoiseBasis::Magnitude {
        magnitude *= relative_draw(spec.rel_error, rng);
    }
    Measurement {
        magnitude,
        saturated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::random_rotation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn field() -> FieldVector {
        FieldVector::world(Vector3::new(4e-5, 0.0, 0.0))
    }

    #[test]
    fn noiseless_identity_and_rotated() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let spec = MagnetometerSpec::noiseless();
        let m = measure(
            &field(),
            &FieldVector::zero(),
            &Rotation::identity(),
            &spec,
            &mut rng,
        );
        assert_eq!(m.magnitude, 4e-5);
        assert!(!m.saturated);
        for _ in 0..100 {
            let r = random_rotation(&mut rng);
            let m = measure(&field(), &FieldVector::zero(), &r, &spec, &mut rng);
            assert!((m.magnitude - 4e-5).abs() < 1e-12 * 4e-5);
        }
    }

    #[test]
    fn axis_aligned_noise_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let spec = MagnetometerSpec::default();
        for _ in 0..100_000 {
            let m = measure(
                &field(),
                &FieldVector::zero(),
                &Rotation::identity(),
                &spec,
                &mut rng,
            );
            assert!(m.magnitude >= 0.99 * 4e-5 && m.magnitude <= 1.01 * 4e-5);
        }
    }

    #[test]
    fn rotated_noise_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let spec = MagnetometerSpec::default();
        for _ in 0..20_000 {
            let r = random_rotation(&mut rng);
            let m = measure(&field(), &FieldVector::zero(), &r, &spec, &mut rng);
            assert!((m.magnitude - 4e-5).abs() <= 0.01 * 4e-5 * 3f64.sqrt());
        }
    }

    #[test]
    fn magnitude_basis_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let spec = MagnetometerSpec::new(0.01, 0.12, NoiseBasis::Magnitude).unwrap();
        for _ in 0..10_000 {
            let r = random_rotation(&mut rng);
            let m = measure(&field(), &FieldVector::zero(), &r, &spec, &mut rng);
            assert!((m.magnitude - 4e-5).abs() <= 0.01 * 4e-5 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn error_grows_with_rel_error() {
        let mean_abs_error = |rel: f64| {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let spec = MagnetometerSpec::new(rel, 0.12, NoiseBasis::Component).unwrap();
            let n = 20_000;
            (0..n)
                .map(|_| {
                    let r = random_rotation(&mut rng);
                    (measure(&field(), &FieldVector::zero(), &r, &spec, &mut rng).magnitude - 4e-5)
                        .abs()
                })
                .sum::<f64>()
                / n as f64
        };
        let (e0, e1, e2) = (
            mean_abs_error(0.0),
            mean_abs_error(0.005),
            mean_abs_error(0.01),
        );
        assert!(e0 <= e1 && e1 <= e2, "{e0} {e1} {e2}");
    }

    #[test]
    fn saturation_flags_and_clips() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = MagnetometerSpec::noiseless();
        let strong = FieldVector::world(Vector3::new(0.2, 0.0, 0.0));
        let m = measure(
            &strong,
            &FieldVector::zero(),
            &Rotation::identity(),
            &spec,
            &mut rng,
        );
        assert!(m.saturated);
        assert_eq!(m.magnitude, 0.12);
    }

    #[test]
    fn residual_is_added_before_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let spec = MagnetometerSpec::noiseless();
        let residual = FieldVector::world(Vector3::new(1e-7, 0.0, 0.0));
        let m = measure(
            &field(),
            &residual,
            &random_rotation(&mut rng),
            &spec,
            &mut rng,
        );
        assert!((m.magnitude - 4.01e-5).abs() < 1e-17);
    }

    #[test]
    fn spec_validation() {
        assert!(MagnetometerSpec::new(1.0, 0.12, NoiseBasis::Component).is_err());
        assert!(MagnetometerSpec::new(-0.1, 0.12, NoiseBasis::Component).is_err());
        assert!(MagnetometerSpec::new(0.01, 0.0, NoiseBasis::Component).is_err());
        assert!("bogus".parse::<NoiseBasis>().is_err());
    }
}
