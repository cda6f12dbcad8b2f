//! Ranging and lateration.
//!
//! Every wire reading is turned into a distance by inverting the
//! infinite-wire field law. Three corner wires are combined in closed form;
//! larger cages are solved per axis family as a linearized least-squares
//! problem and the planar fixes are merged with wire-count weights.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::fieldmodel::Permeability;
use crate::geometry::{Axis, LocalizationMode, WireSet};
use crate::sensor::Measurement;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeEstimate {
    pub wire_index: usize,
    pub distance: f64,
}

/// Distance to a wire from the measured flux magnitude: `mu I / (2 pi B)`.
pub fn range_from_field(b: f64, current: f64, mu: Permeability) -> Result<f64> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::InvalidMeasurement(b));
    }
    Ok(mu.value() * current / (2.0 * std::f64::consts::PI * b))
}

/// Estimated position with per-axis availability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub coords: Vector3<f64>,
    pub available: [bool; 3],
    /// Set when any contributing measurement was clipped by the sensor range.
    pub saturated: bool,
}

impl Position {
    pub fn x(&self) -> f64 {
        self.coords.x
    }
    pub fn y(&self) -> f64 {
        self.coords.y
    }
    pub fn z(&self) -> f64 {
        self.coords.z
    }
}

/// Closed-form solution for three wires lying on the coordinate axes.
///
/// `rx`, `ry`, `rz` are the distances to the X, Y and Z axes. Each squared
/// coordinate is recovered from the three cylinder equations; a negative
/// radicand (possible under noise near a coordinate plane) is clamped to 0.
pub fn trilaterate(rx: f64, ry: f64, rz: f64) -> Position {
    let (x2, y2, z2) = (rx * rx, ry * ry, rz * rz);
    let root = |v: f64| (0.5 * v).max(0.0).sqrt();
    Position {
        coords: Vector3::new(root(z2 + y2 - x2), root(x2 + z2 - y2), root(x2 + y2 - z2)),
        available: [true; 3],
        saturated: false,
    }
}

/// Two in-plane coordinates from one wire family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarFix {
    pub family: Axis,
    /// Coordinates in `family.plane()` order: Z gives (x, y), Y gives (x, z),
    /// X gives (y, z).
    pub coords: [f64; 2],
}

/// Least-squares position in the plane perpendicular to a wire family.
///
/// Subtracting the first circle equation from the others gives, for row i,
/// `2(a_i - a_1) u + 2(b_i - b_1) v = R_1^2 - R_i^2 + |p_i - p_1|^2` in
/// coordinates centered on the first wire. The system is solved with a QR
/// factorization; the result is the same minimizer as `(A^T A)^-1 A^T b`.
pub fn laterate_family(family: Axis, offsets: &[[f64; 2]], distances: &[f64]) -> Result<PlanarFix> {
    if offsets.len() != distances.len() {
        return Err(Error::MeasurementCount {
            expected: offsets.len(),
            got: distances.len(),
        });
    }
    if offsets.len() < 3 {
        return Err(Error::Arity {
            family,
            expected: 3,
            got: offsets.len(),
        });
    }
    if let Some(&bad) = distances.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidMeasurement(bad));
    }

    let (a, b) = linear_system(offsets, distances);
    let r = solve_least_squares(a, b).ok_or(Error::Singular { family })?;
    let origin = offsets[0];
    Ok(PlanarFix {
        family,
        coords: [origin[0] + r[0], origin[1] + r[1]],
    })
}

/// The subtracted system, centered on the first wire.
pub(crate) fn linear_system(
    offsets: &[[f64; 2]],
    distances: &[f64],
) -> (DMatrix<f64>, DVector<f64>) {
    let rows = offsets.len() - 1;
    let (p1, r1) = (offsets[0], distances[0]);
    let mut a = DMatrix::zeros(rows, 2);
    let mut b = DVector::zeros(rows);
    for (row, (p, r)) in offsets[1..].iter().zip(&distances[1..]).enumerate() {
        let (da, db) = (p[0] - p1[0], p[1] - p1[1]);
        a[(row, 0)] = 2.0 * da;
        a[(row, 1)] = 2.0 * db;
        b[row] = r1 * r1 - r * r + da * da + db * db;
    }
    (a, b)
}

fn solve_least_squares(a: DMatrix<f64>, mut b: DVector<f64>) -> Option<[f64; 2]> {
    let scale = a.norm();
    if scale == 0.0 {
        return None;
    }
    let qr = a.qr();
    let r = qr.r();
    qr.q_tr_mul(&mut b);
    let (r00, r01, r11) = (r[(0, 0)], r[(0, 1)], r[(1, 1)]);
    if r00.abs() <= 1e-12 * scale || r11.abs() <= 1e-12 * scale {
        return None;
    }
    let v = b[1] / r11;
    let u = (b[0] - r01 * v) / r00;
    Some([u, v])
}

/// Weighted merge of planar fixes; weights are the family wire counts.
///
/// `counts[i]` is the weight of the family along axis i (n, m, p). A family
/// with a positive count must supply a fix.
pub fn fuse(fixes: &[PlanarFix], n: usize, m: usize, p: usize) -> Result<Position> {
    let weight = |axis: Axis| match axis {
        Axis::X => n,
        Axis::Y => m,
        Axis::Z => p,
    } as f64;
    for axis in Axis::ALL {
        if weight(axis) > 0.0 && !fixes.iter().any(|f| f.family == axis) {
            return Err(Error::InvalidWireSet(format!(
                "{axis} family has weight {} but no planar fix",
                weight(axis)
            )));
        }
    }

    let mut sum = Vector3::zeros();
    let mut total = Vector3::<f64>::zeros();
    for fix in fixes {
        let w = weight(fix.family);
        if w == 0.0 {
            continue;
        }
        for (k, &coord_index) in fix.family.plane().iter().enumerate() {
            sum[coord_index] += w * fix.coords[k];
            total[coord_index] += w;
        }
    }
    for axis in Axis::ALL {
        if total[axis.index()] == 0.0 {
            return Err(Error::Unlocalizable(axis.name()));
        }
    }
    Ok(Position {
        coords: sum.component_div(&total),
        available: [true; 3],
        saturated: false,
    })
}

/// Full pipeline from one reading per wire to a 3D position.
pub fn localize(
    measurements: &[Measurement],
    wireset: &WireSet,
    mu: Permeability,
) -> Result<Position> {
    if measurements.len() != wireset.len() {
        return Err(Error::MeasurementCount {
            expected: wireset.len(),
            got: measurements.len(),
        });
    }
    let saturated = measurements.iter().any(|m| m.saturated);
    let ranges = measurements
        .iter()
        .zip(wireset.wires())
        .map(|(m, w)| range_from_field(m.magnitude, w.current(), mu))
        .collect::<Result<Vec<f64>>>()?;

    let mut position = match wireset.mode() {
        LocalizationMode::Trilateration => {
            let corner = wireset.corner()?;
            let range_of = |axis: Axis| ranges[wireset.family(axis)[0]];
            let mut p = trilaterate(range_of(Axis::X), range_of(Axis::Y), range_of(Axis::Z));
            p.coords += corner;
            p
        }
        LocalizationMode::Multilateration => {
            let mut fixes = Vec::with_capacity(3);
            let mut weights = [0usize; 3];
            for axis in Axis::ALL {
                if !wireset.is_laterable(axis) {
                    continue;
                }
                let members = wireset.family(axis);
                let offsets: Vec<[f64; 2]> = members
                    .iter()
                    .map(|&i| wireset.wires()[i].offset())
                    .collect();
                let distances: Vec<f64> = members.iter().map(|&i| ranges[i]).collect();
                fixes.push(laterate_family(axis, &offsets, &distances)?);
                weights[axis.index()] = members.len();
            }
            fuse(&fixes, weights[0], weights[1], weights[2])?
        }
    };
    position.saturated = saturated;
    Ok(position)
}
