use magloc::fieldmodel::{flux_density_at, flux_magnitude, Permeability};
use magloc::geometry::{
    builtin_arrangement, random_rotation, wire_distance, Arrangement, Axis, Wire, DEFAULT_CLEARANCE,
};
use magloc::locate::{laterate_family, localize, range_from_field, trilaterate};
use magloc::sensor::Measurement;
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn axis() -> impl Strategy<Value = Axis> {
    prop_oneof![Just(Axis::X), Just(Axis::Y), Just(Axis::Z)]
}

fn point() -> impl Strategy<Value = Vector3<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

fn wire() -> impl Strategy<Value = Wire> {
    (axis(), -2.0..2.0f64, -2.0..2.0f64, 0.1..500.0f64)
        .prop_map(|(a, u, v, i)| Wire::new(a, [u, v], i).unwrap())
}

// Plain 2x2 normal equations on the system built from scratch.
fn normal_equations(offsets: &[[f64; 2]], d: &[f64]) -> [f64; 2] {
    let [a1, b1] = offsets[0];
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 1..offsets.len() {
        let (a, b) = (offsets[i][0] - a1, offsets[i][1] - b1);
        let rhs = 0.5 * (d[0] * d[0] - d[i] * d[i] + a * a + b * b);
        s11 += a * a;
        s12 += a * b;
        s22 += b * b;
        t1 += a * rhs;
        t2 += b * rhs;
    }
    let det = s11 * s22 - s12 * s12;
    [
        a1 + (s22 * t1 - s12 * t2) / det,
        b1 + (s11 * t2 - s12 * t1) / det,
    ]
}

proptest! {
    #[test]
    fn distance_ignores_motion_along_the_wire(w in wire(), p in point(), t in -100.0..100.0f64) {
        let d0 = wire_distance(&w, &p);
        let d1 = wire_distance(&w, &(p + w.axis().unit() * t));
        prop_assert!((d0 - d1).abs() <= 1e-12 * d0.max(1.0));
    }

    #[test]
    fn field_magnitude_follows_inverse_distance(w in wire(), p in point()) {
        let mu = Permeability::default();
        let r = wire_distance(&w, &p);
        prop_assume!(r > 1e-3);
        let b = flux_density_at(&w, &p, mu).unwrap().b;
        let expected = mu.value() * w.current() / (2.0 * std::f64::consts::PI * r);
        prop_assert!((b.norm() - expected).abs() <= 1e-12 * expected);
        prop_assert!((flux_magnitude(w.current(), r, mu) - expected).abs() <= 1e-12 * expected);

        // twice as far along the same radial line, half the field
        let foot = p - w.radial(&p);
        let far = foot + w.radial(&p) * 2.0;
        let b2 = flux_density_at(&w, &far, mu).unwrap().b;
        prop_assert!((b2.norm() * 2.0 - b.norm()).abs() <= 1e-12 * b.norm());

        // azimuthal: perpendicular to both the axis and the radial direction
        prop_assert!(b.dot(&w.axis().unit()).abs() <= 1e-12 * b.norm());
        prop_assert!(b.dot(&w.radial(&p)).abs() <= 1e-12 * b.norm() * r);
    }

    #[test]
    fn field_is_symmetric_under_rotation_about_the_wire(w in wire(), r in 0.01..2.0f64, phi in 0.0..std::f64::consts::TAU) {
        let mu = Permeability::default();
        let [i, j] = w.axis().plane();
        let mut p = Vector3::zeros();
        p[i] = w.offset()[0] + r * phi.cos();
        p[j] = w.offset()[1] + r * phi.sin();
        let b = flux_density_at(&w, &p, mu).unwrap().b.norm();
        let expected = flux_magnitude(w.current(), r, mu);
        prop_assert!((b - expected).abs() <= 1e-10 * expected);
    }

    #[test]
    fn ranging_round_trips(r in 1e-3..10.0f64, current in 0.1..1000.0f64) {
        let mu = Permeability::default();
        let back = range_from_field(flux_magnitude(current, r, mu), current, mu).unwrap();
        prop_assert!((back - r).abs() <= 1e-12 * r);
    }

    #[test]
    fn rotations_are_isometries_and_compose(seed in any::<u64>(), v in point()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_rotation(&mut rng);
        let b = random_rotation(&mut rng);
        let m = a.matrix();
        prop_assert!((m.transpose() * m - nalgebra::Matrix3::identity()).abs().max() < 1e-12);
        prop_assert!((m.determinant() - 1.0).abs() < 1e-12);
        let n = v.norm().max(1.0);
        prop_assert!((a.apply(&v).norm() - v.norm()).abs() <= 1e-12 * n);
        prop_assert!((a.apply_inverse(&a.apply(&v)) - v).norm() <= 1e-12 * n);
        let ab = a.compose(&b);
        prop_assert!((ab.apply(&v).norm() - v.norm()).abs() <= 1e-12 * n);
        prop_assert!((ab.apply(&v) - a.apply(&b.apply(&v))).norm() <= 1e-12 * n);
    }

    #[test]
    fn trilateration_is_total(rx in 0.0..10.0f64, ry in 0.0..10.0f64, rz in 0.0..10.0f64) {
        let p = trilaterate(rx, ry, rz);
        prop_assert!(p.coords.iter().all(|c| c.is_finite() && *c >= 0.0));
    }

    #[test]
    fn trilateration_recovers_octant_points(x in 0.0..3.0f64, y in 0.0..3.0f64, z in 0.0..3.0f64) {
        let rx = y.hypot(z);
        let ry = x.hypot(z);
        let rz = x.hypot(y);
        let p = trilaterate(rx, ry, rz);
        prop_assert!((p.coords - Vector3::new(x, y, z)).norm() < 1e-6);
    }

    #[test]
    fn lateration_scales_with_the_geometry(
        offs in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 3..8),
        noise in prop::collection::vec(0.9..1.1f64, 8),
        target in (-1.0..1.0f64, -1.0..1.0f64),
        s in 0.1..10.0f64,
    ) {
        let offsets: Vec<[f64; 2]> = offs.iter().map(|&(a, b)| [a, b]).collect();
        let d: Vec<f64> = offsets
            .iter()
            .zip(&noise)
            .map(|(o, k)| (o[0] - target.0).hypot(o[1] - target.1) * k)
            .collect();
        let Ok(fix) = laterate_family(Axis::Z, &offsets, &d) else {
            return Ok(());
        };
        let scaled_offsets: Vec<[f64; 2]> = offsets.iter().map(|o| [o[0] * s, o[1] * s]).collect();
        let scaled_d: Vec<f64> = d.iter().map(|x| x * s).collect();
        let scaled = laterate_family(Axis::Z, &scaled_offsets, &scaled_d).unwrap();
        let size = fix.coords[0].abs().max(fix.coords[1].abs()).max(1.0);
        for k in 0..2 {
            prop_assert!((scaled.coords[k] - s * fix.coords[k]).abs() <= 1e-8 * s * size);
        }
    }

    #[test]
    fn lateration_matches_normal_equations(
        offs in prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64), 3..8),
        noise in prop::collection::vec(0.95..1.05f64, 8),
        target in (-1.0..1.0f64, -1.0..1.0f64),
    ) {
        let offsets: Vec<[f64; 2]> = offs.iter().map(|&(a, b)| [a, b]).collect();
        let d: Vec<f64> = offsets
            .iter()
            .zip(&noise)
            .map(|(o, k)| (o[0] - target.0).hypot(o[1] - target.1) * k)
            .collect();
        let Ok(fix) = laterate_family(Axis::Y, &offsets, &d) else {
            return Ok(());
        };
        // keep to well-conditioned layouts so the oracle itself is trustworthy
        let oracle = normal_equations(&offsets, &d);
        prop_assume!(oracle.iter().all(|c| c.abs() < 100.0));
        for k in 0..2 {
            prop_assert!((fix.coords[k] - oracle[k]).abs() < 1e-6, "{:?} vs {:?}", fix.coords, oracle);
        }
    }
}

#[test]
fn noiseless_pipeline_recovers_points_for_every_cage() {
    let mu = Permeability::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for name in Arrangement::ALL {
        let set = builtin_arrangement(name, DEFAULT_CLEARANCE, 100.0).unwrap();
        let env = magloc::body::PhantomSpec::default().envelope();
        for _ in 0..200 {
            let t = Vector3::from_fn(|i, _| {
                let u: f64 = rand::Rng::random(&mut rng);
                env.min[i] + u * (env.max[i] - env.min[i])
            });
            let readings: Vec<Measurement> = set
                .wires()
                .iter()
                .map(|w| Measurement {
                    magnitude: flux_density_at(w, &t, mu).unwrap().magnitude(),
                    saturated: false,
                })
                .collect();
            let p = localize(&readings, &set, mu).unwrap();
            assert!(
                (p.coords - t).norm() < 1e-9,
                "{name}: {:?} vs {t:?}",
                p.coords
            );
        }
    }
}
