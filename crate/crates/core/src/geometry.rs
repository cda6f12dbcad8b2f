//! Wires, wire arrangements and sensor orientations.
//!
//! Coordinates are meters in a right-handed frame with Z vertical. The
//! phantom stands in the (+x, +y, +z) octant. A wire is an infinite line
//! parallel to one coordinate axis; its `offset` holds the two remaining
//! coordinates in ascending axis order (X-wire: (y, z), Y-wire: (x, z),
//! Z-wire: (x, y)).

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::body::Aabb;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn unit(self) -> Vector3<f64> {
        let mut v = Vector3::zeros();
        v[self.index()] = 1.0;
        v
    }

    /// Indices of the two coordinates perpendicular to this axis, ascending.
    pub fn plane(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }

    pub fn name(self) -> char {
        match self {
            Axis::X => 'x',
            Axis::Y => 'y',
            Axis::Z => 'z',
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name().to_ascii_uppercase())
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::Config(format!("unknown axis {other:?}"))),
        }
    }
}

/// An infinite straight DC conductor parallel to a coordinate axis.
///
/// Current flows in the +axis direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wire {
    axis: Axis,
    offset: [f64; 2],
    current: f64,
}

impl Wire {
    pub fn new(axis: Axis, offset: [f64; 2], current: f64) -> Result<Self> {
        if !(current.is_finite() && current > 0.0) {
            return Err(Error::InvalidWire(format!(
                "current must be positive and finite, got {current}"
            )));
        }
        if !offset.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidWire(format!(
                "offset must be finite, got {offset:?}"
            )));
        }
        Ok(Wire {
            axis,
            offset,
            current,
        })
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn offset(&self) -> [f64; 2] {
        self.offset
    }

    pub fn current(&self) -> f64 {
        self.current
    }

    pub fn with_current(&self, current: f64) -> Result<Self> {
        Wire::new(self.axis, self.offset, current)
    }

    /// Perpendicular vector from the wire axis to `point`.
    ///
    /// The axis component is dropped exactly, so the result does not depend
    /// on where along the wire the point sits.
    pub fn radial(&self, point: &Vector3<f64>) -> Vector3<f64> {
        let [a, b] = self.axis.plane();
        let mut r = Vector3::zeros();
        r[a] = point[a] - self.offset[0];
        r[b] = point[b] - self.offset[1];
        r
    }
}

/// Euclidean distance from `point` to the infinite line of `wire`.
pub fn wire_distance(wire: &Wire, point: &Vector3<f64>) -> f64 {
    let [a, b] = wire.axis.plane();
    (point[a] - wire.offset[0]).hypot(point[b] - wire.offset[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalizationMode {
    /// One wire per axis, all through a common corner.
    Trilateration,
    /// At least two axis families with three or more non-collinear wires.
    Multilateration,
}

/// Per-family wire counts: `n` X-wires, `m` Y-wires, `p` Z-wires.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FamilyCounts {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl FamilyCounts {
    pub fn get(&self, axis: Axis) -> usize {
        match axis {
            Axis::X => self.n,
            Axis::Y => self.m,
            Axis::Z => self.p,
        }
    }

    pub fn total(&self) -> usize {
        self.n + self.m + self.p
    }
}

/// An ordered, validated collection of wires.
#[derive(Debug, Clone, PartialEq)]
pub struct WireSet {
    wires: Vec<Wire>,
    counts: FamilyCounts,
    mode: LocalizationMode,
    laterable: [bool; 3],
}

impl WireSet {
    pub fn new(wires: Vec<Wire>) -> Result<Self> {
        if wires.is_empty() {
            return Err(Error::InvalidWireSet("no wires".into()));
        }
        let mut counts = FamilyCounts::default();
        for w in &wires {
            match w.axis {
                Axis::X => counts.n += 1,
                Axis::Y => counts.m += 1,
                Axis::Z => counts.p += 1,
            }
        }

        let laterable = Axis::ALL.map(|axis| {
            let offsets: Vec<[f64; 2]> = wires
                .iter()
                .filter(|w| w.axis == axis)
                .map(|w| w.offset)
                .collect();
            offsets.len() >= 3 && !collinear(&offsets)
        });
        let mode = if counts.n == 1 && counts.m == 1 && counts.p == 1 {
            LocalizationMode::Trilateration
        } else {
            let usable = laterable.iter().filter(|&&ok| ok).count();
            if usable < 2 {
                return Err(Error::InvalidWireSet(format!(
                    "need one wire per axis or two families of >= 3 non-collinear wires \
                     (counts X={}, Y={}, Z={})",
                    counts.n, counts.m, counts.p
                )));
            }
            LocalizationMode::Multilateration
        };

        let set = WireSet {
            wires,
            counts,
            mode,
            laterable,
        };
        if mode == LocalizationMode::Trilateration {
            set.corner()?;
        }
        Ok(set)
    }

    pub fn wires(&self) -> &[Wire] {
        &self.wires
    }

    pub fn len(&self) -> usize {
        self.wires.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wires.is_empty()
    }

    pub fn counts(&self) -> FamilyCounts {
        self.counts
    }

    pub fn mode(&self) -> LocalizationMode {
        self.mode
    }

    /// Whether a family has three or more wires with non-collinear offsets.
    pub fn is_laterable(&self, axis: Axis) -> bool {
        self.laterable[axis.index()]
    }

    /// Wire indices belonging to one axis family, in set order.
    pub fn family(&self, axis: Axis) -> Vec<usize> {
        self.wires
            .iter()
            .enumerate()
            .filter(|(_, w)| w.axis == axis)
            .map(|(i, _)| i)
            .collect()
    }

    /// The common point of the three wires of a trilateration set.
    pub fn corner(&self) -> Result<Vector3<f64>> {
        if self.counts != (FamilyCounts { n: 1, m: 1, p: 1 }) {
            return Err(Error::InvalidWireSet(
                "corner is only defined for one wire per axis".into(),
            ));
        }
        let by_axis = |axis: Axis| self.wires.iter().find(|w| w.axis == axis).unwrap();
        let (wx, wy, wz) = (by_axis(Axis::X), by_axis(Axis::Y), by_axis(Axis::Z));
        // X: (y, z); Y: (x, z); Z: (x, y)
        let corner = Vector3::new(wz.offset[0], wz.offset[1], wx.offset[1]);
        let tol = 1e-9 * (1.0 + corner.amax());
        if (wx.offset[0] - corner.y).abs() > tol
            || (wy.offset[0] - corner.x).abs() > tol
            || (wy.offset[1] - corner.z).abs() > tol
        {
            return Err(Error::InvalidWireSet(
                "trilateration wires do not meet at a common corner".into(),
            ));
        }
        Ok(corner)
    }

    pub fn with_current(&self, current: f64) -> Result<Self> {
        let wires = self
            .wires
            .iter()
            .map(|w| w.with_current(current))
            .collect::<Result<Vec<_>>>()?;
        WireSet::new(wires)
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let file: WireFile =
            toml::from_str(s).map_err(|e| Error::Config(format!("wire file: {e}")))?;
        let wires = file
            .wire
            .iter()
            .map(WireRecord::to_wire)
            .collect::<Result<Vec<_>>>()?;
        WireSet::new(wires)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        WireSet::from_toml_str(&text)
    }

    /// The `[[wire]]` records of this set, one per wire.
    pub fn records(&self) -> Vec<WireRecord> {
        self.wires.iter().map(WireRecord::from).collect()
    }

    pub fn to_toml_string(&self) -> String {
        let file = WireFile {
            wire: self.records(),
        };
        toml::to_string(&file).expect("wire records always serialize")
    }
}

/// One wire in the structured wire file (`[[wire]]` tables).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WireRecord {
    pub axis: Axis,
    pub offset_a: f64,
    pub offset_b: f64,
    pub current: f64,
}

impl WireRecord {
    pub fn to_wire(&self) -> Result<Wire> {
        Wire::new(self.axis, [self.offset_a, self.offset_b], self.current)
    }
}

impl From<&Wire> for WireRecord {
    fn from(w: &Wire) -> Self {
        WireRecord {
            axis: w.axis,
            offset_a: w.offset[0],
            offset_b: w.offset[1],
            current: w.current,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WireFile {
    #[serde(default)]
    wire: Vec<WireRecord>,
}

fn collinear(points: &[[f64; 2]]) -> bool {
    let Some(first) = points.first() else {
        return true;
    };
    let scale = points
        .iter()
        .map(|p| (p[0] - first[0]).hypot(p[1] - first[1]))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    for (i, p) in points.iter().enumerate() {
        for q in &points[i + 1..] {
            let cross =
                (p[0] - first[0]) * (q[1] - first[1]) - (p[1] - first[1]) * (q[0] - first[0]);
            if cross.abs() > 1e-9 * scale * scale {
                return false;
            }
        }
    }
    true
}

/// Default gap between the phantom's bounding box and the cage.
pub const DEFAULT_CLEARANCE: f64 = 0.2;

/// Built-in wire cages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arrangement {
    W3,
    W6,
    W9,
    W15,
    W30,
}

impl Arrangement {
    pub const ALL: [Arrangement; 5] = [
        Arrangement::W3,
        Arrangement::W6,
        Arrangement::W9,
        Arrangement::W15,
        Arrangement::W30,
    ];

    pub fn wire_count(self) -> usize {
        match self {
            Arrangement::W3 => 3,
            Arrangement::W6 => 6,
            Arrangement::W9 => 9,
            Arrangement::W15 => 15,
            Arrangement::W30 => 30,
        }
    }

    /// Wires per family (X, Y, Z).
    pub fn family_split(self) -> FamilyCounts {
        match self {
            Arrangement::W3 => FamilyCounts { n: 1, m: 1, p: 1 },
            Arrangement::W6 => FamilyCounts { n: 0, m: 3, p: 3 },
            other => {
                let total = other.wire_count();
                let horizontal = (4 * total / 15).max(3);
                FamilyCounts {
                    n: horizontal,
                    m: horizontal,
                    p: total - 2 * horizontal,
                }
            }
        }
    }
}

impl fmt::Display for Arrangement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{}", self.wire_count())
    }
}

impl FromStr for Arrangement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "W3" | "3" => Ok(Arrangement::W3),
            "W6" | "6" => Ok(Arrangement::W6),
            "W9" | "9" => Ok(Arrangement::W9),
            "W15" | "15" => Ok(Arrangement::W15),
            "W30" | "30" => Ok(Arrangement::W30),
            other => Err(Error::Config(format!("unknown arrangement {other:?}"))),
        }
    }
}

/// Builds a cage around the default phantom's envelope.
pub fn builtin_arrangement(name: Arrangement, clearance: f64, current: f64) -> Result<WireSet> {
    arrangement_around(
        name,
        &crate::body::PhantomSpec::default().envelope(),
        clearance,
        current,
    )
}

/// Builds a cage around `envelope`.
///
/// The cage is the envelope grown by `clearance` on every side. Z-wires
/// are spaced evenly along the closed horizontal perimeter starting at the
/// (lo x, lo y) corner. X- and Y-wires are spaced evenly along the two
/// vertical sides and the top edge of their cross-section, never along the
/// floor, where they would run underneath the body.
pub fn arrangement_around(
    name: Arrangement,
    envelope: &Aabb,
    clearance: f64,
    current: f64,
) -> Result<WireSet> {
    if !(clearance.is_finite() && clearance > 0.0) {
        return Err(Error::InvalidClearance(clearance));
    }
    let lo = envelope.min - Vector3::repeat(clearance);
    let hi = envelope.max + Vector3::repeat(clearance);

    let mut wires = Vec::with_capacity(name.wire_count());
    if name == Arrangement::W3 {
        wires.push(Wire::new(Axis::X, [lo.y, lo.z], current)?);
        wires.push(Wire::new(Axis::Y, [lo.x, lo.z], current)?);
        wires.push(Wire::new(Axis::Z, [lo.x, lo.y], current)?);
        return WireSet::new(wires);
    }

    let split = name.family_split();
    for axis in Axis::ALL {
        let k = split.get(axis);
        if k == 0 {
            continue;
        }
        let [a, b] = axis.plane();
        let points = match axis {
            Axis::Z => closed_perimeter(lo[a], hi[a], lo[b], hi[b], k),
            _ => open_perimeter(lo[a], hi[a], lo[b], hi[b], k),
        };
        for p in points {
            wires.push(Wire::new(axis, p, current)?);
        }
    }
    WireSet::new(wires)
}

/// `k` points evenly spaced by arc length around the rectangle, starting at
/// (a0, b0) and walking counter-clockwise.
fn closed_perimeter(a0: f64, a1: f64, b0: f64, b1: f64, k: usize) -> Vec<[f64; 2]> {
    let (wa, wb) = (a1 - a0, b1 - b0);
    let length = 2.0 * (wa + wb);
    (0..k)
        .map(|i| {
            let s = length * i as f64 / k as f64;
            if s < wa {
                [a0 + s, b0]
            } else if s < wa + wb {
                [a1, b0 + (s - wa)]
            } else if s < 2.0 * wa + wb {
                [a1 - (s - wa - wb), b1]
            } else {
                [a0, b1 - (s - 2.0 * wa - wb)]
            }
        })
        .collect()
}

/// `k` points at the midpoints of equal arc-length segments of the path
/// up the a0 side, across the top (b1) and down the a1 side.
fn open_perimeter(a0: f64, a1: f64, b0: f64, b1: f64, k: usize) -> Vec<[f64; 2]> {
    let (wa, wb) = (a1 - a0, b1 - b0);
    let length = 2.0 * wb + wa;
    (0..k)
        .map(|i| {
            let s = length * (i as f64 + 0.5) / k as f64;
            if s < wb {
                [a0, b0 + s]
            } else if s < wb + wa {
                [a0 + (s - wb), b1]
            } else {
                [a1, b1 - (s - wb - wa)]
            }
        })
        .collect()
}

/// Orientation of the magnetometer triad relative to the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation(UnitQuaternion<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(UnitQuaternion::identity())
    }

    pub fn from_quaternion(q: UnitQuaternion<f64>) -> Self {
        Rotation(q)
    }

    pub fn quaternion(&self) -> &UnitQuaternion<f64> {
        &self.0
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        self.0.to_rotation_matrix().into_inner()
    }

    /// Sensor-to-world.
    pub fn apply(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.transform_vector(v)
    }

    /// World-to-sensor.
    pub fn apply_inverse(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.0.inverse_transform_vector(v)
    }

    pub fn compose(&self, other: &Rotation) -> Rotation {
        Rotation(self.0 * other.0)
    }
}

/// A rotation drawn uniformly from SO(3).
///
/// Marsaglia's method for a uniform point on the unit 3-sphere. Only
/// arithmetic and `sqrt` are used, so the draw is bit-identical across
/// optimization levels (fused `sincos` calls are not).
pub fn random_rotation<R: Rng + ?Sized>(rng: &mut R) -> Rotation {
    let mut disc = || loop {
        let a = 2.0 * rng.random::<f64>() - 1.0;
        let b = 2.0 * rng.random::<f64>() - 1.0;
        let s = a * a + b * b;
        if s < 1.0 && s > 0.0 {
            return (a, b, s);
        }
    };
    let (x1, x2, s1) = disc();
    let (x3, x4, s2) = disc();
    let k = ((1.0 - s1) / s2).sqrt();
    let q = Quaternion::new(x1, x2, x3 * k, x4 * k);
    Rotation(UnitQuaternion::new_normalize(q))
}
