//! Voxel human phantom.
//!
//! The procedural phantom is a standing figure built from analytic solids
//! (ellipsoidal head, cylindrical neck, elliptic-cylinder torso, tapered
//! limbs), sampled on a regular grid. The figure is mirror-symmetric about
//! the sagittal plane x = center, its feet rest on z = 0 and it is kept a
//! `margin` away from the x = 0 and y = 0 planes.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;

use crate::{Error, Result};

/// Reference height of the procedural figure; all dimensions scale with it.
const REFERENCE_HEIGHT: f64 = 1.75;
/// Half-width of the figure including the arms, at reference height.
const HALF_WIDTH: f64 = 0.25;
/// Half-depth (front to back) of the torso, the deepest part.
const HALF_DEPTH: f64 = 0.11;

pub const DEFAULT_RESOLUTION: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

impl Aabb {
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    fn around(points: &[Vector3<f64>]) -> Option<Aabb> {
        let first = *points.first()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in points {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }
}

/// Voxel centers (meters) of a body.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyModel {
    voxels: Vec<Vector3<f64>>,
    resolution: f64,
    bounding_box: Aabb,
}

impl BodyModel {
    pub fn new(voxels: Vec<Vector3<f64>>, resolution: f64) -> Result<Self> {
        let bounding_box = Aabb::around(&voxels).ok_or(Error::EmptyBody)?;
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Config(format!(
                "invalid voxel resolution {resolution}"
            )));
        }
        Ok(BodyModel {
            voxels,
            resolution,
            bounding_box,
        })
    }

    pub fn voxels(&self) -> &[Vector3<f64>] {
        &self.voxels
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn bounding_box(&self) -> &Aabb {
        &self.bounding_box
    }

    /// Integer grid index of a voxel relative to the bounding-box origin.
    pub fn grid_index(&self, p: &Vector3<f64>) -> [i64; 3] {
        let rel = (p - self.bounding_box.min) / self.resolution;
        [
            rel.x.round() as i64,
            rel.y.round() as i64,
            rel.z.round() as i64,
        ]
    }

    /// Writes one `x,y,z` line per voxel, preceded by `#` comment lines.
    pub fn save(&self, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            for line in header {
                writeln!(out, "# {line}")?;
            }
            for v in &self.voxels {
                writeln!(out, "{},{},{}", v.x, v.y, v.z)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Parameters of the procedural phantom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhantomSpec {
    pub height: f64,
    pub resolution: f64,
    /// Distance from the x = 0 and y = 0 planes to the figure's envelope.
    pub margin: f64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            height: REFERENCE_HEIGHT,
            resolution: DEFAULT_RESOLUTION,
            margin: 0.5,
        }
    }
}

impl PhantomSpec {
    pub fn new(height: f64, resolution: f64) -> Self {
        PhantomSpec {
            height,
            resolution,
            ..PhantomSpec::default()
        }
    }

    fn scale(&self) -> f64 {
        self.height / REFERENCE_HEIGHT
    }

    fn center(&self) -> (f64, f64) {
        let s = self.scale();
        (self.margin + HALF_WIDTH * s, self.margin + HALF_DEPTH * s)
    }

    /// Analytic envelope of the figure in world coordinates.
    pub fn envelope(&self) -> Aabb {
        let s = self.scale();
        let (cx, cy) = self.center();
        Aabb {
            min: Vector3::new(cx - HALF_WIDTH * s, cy - HALF_DEPTH * s, 0.0),
            max: Vector3::new(cx + HALF_WIDTH * s, cy + HALF_DEPTH * s, self.height),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = self.height.is_finite()
            && self.height > 0.0
            && self.resolution.is_finite()
            && self.resolution > 0.0
            && self.resolution <= self.height / 50.0
            && self.margin.is_finite()
            && self.margin >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidResolution {
                resolution: self.resolution,
                height: self.height,
            })
        }
    }
}

/// Membership test of the figure in local coordinates at reference scale:
/// `x` across (0 on the sagittal plane), `y` front to back, `z` up from the
/// soles.
fn inside_figure(x: f64, y: f64, z: f64) -> bool {
    let ax = x.abs();

    // legs: tapered cylinders from ankle to hip
    if (0.0..=0.86).contains(&z) {
        let r = 0.055 + 0.030 * (z / 0.86);
        if (ax - 0.09).hypot(y) <= r {
            return true;
        }
    }
    // torso: elliptic cylinder
    if (0.84..=1.46).contains(&z) && (x / 0.17).powi(2) + (y / HALF_DEPTH).powi(2) <= 1.0 {
        return true;
    }
    // arms: tapered cylinders hanging from the shoulders
    if (0.78..=1.42).contains(&z) {
        let r = 0.035 + 0.015 * ((z - 0.78) / 0.64);
        if (ax - 0.20).hypot(y) <= r {
            return true;
        }
    }
    // neck
    if (1.44..=1.54).contains(&z) && x.hypot(y) <= 0.055 {
        return true;
    }
    // head: ellipsoid touching z = reference height
    let (hx, hy, hz) = (0.08, 0.10, 0.115);
    let dz = z - (REFERENCE_HEIGHT - hz);
    (x / hx).powi(2) + (y / hy).powi(2) + (dz / hz).powi(2) <= 1.0
}

/// Voxelizes the procedural figure with the default placement margin.
pub fn generate_phantom(height: f64, resolution: f64) -> Result<BodyModel> {
    generate_phantom_with(&PhantomSpec::new(height, resolution))
}

pub fn generate_phantom_with(spec: &PhantomSpec) -> Result<BodyModel> {
    spec.validate()?;
    let s = spec.scale();
    let res = spec.resolution;
    let (cx, cy) = spec.center();

    // grid indices symmetric about the sagittal plane and the coronal plane
    let nx = (HALF_WIDTH * s / res).ceil() as i64;
    let ny = (HALF_DEPTH * s / res).ceil() as i64;
    let nz = (spec.height / res).floor() as i64;

    let mut voxels = Vec::new();
    for k in 0..nz {
        let z = (k as f64 + 0.5) * res;
        for j in -ny..=ny {
            let y = j as f64 * res;
            for i in -nx..=nx {
                let x = i as f64 * res;
                if inside_figure(x / s, y / s, z / s) {
                    voxels.push(Vector3::new(cx + x, cy + y, z));
                }
            }
        }
    }
    BodyModel::new(voxels, res)
}

/// Reads an `x,y,z` voxel file. Blank lines and lines starting with `#` are
/// skipped. The resolution is the smallest positive gap between distinct
/// coordinate values along any axis.
pub fn load_voxels(path: impl AsRef<Path>) -> Result<BodyModel> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::VoxelFile {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut voxels = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(
                lineno,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let mut v = Vector3::zeros();
        for (c, f) in fields.iter().enumerate() {
            v[c] = f
                .parse::<f64>()
                .map_err(|e| err(lineno, format!("field {}: {e}", c + 1)))?;
        }
        if !v.iter().all(|c| c.is_finite()) {
            return Err(err(lineno, "non-finite coordinate".into()));
        }
        if v.iter().any(|&c| c < 0.0) {
            return Err(err(
                lineno,
                format!(
                    "voxel ({},{},{}) lies outside the positive octant",
                    v.x, v.y, v.z
                ),
            ));
        }
        voxels.push(v);
    }
    if voxels.is_empty() {
        return Err(Error::EmptyBody);
    }
    let resolution = infer_resolution(&voxels).unwrap_or(DEFAULT_RESOLUTION);
    BodyModel::new(voxels, resolution)
}

fn infer_resolution(voxels: &[Vector3<f64>]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        let mut values: Vec<f64> = voxels.iter().map(|v| v[axis]).collect();
        values.sort_by(f64::total_cmp);
        for w in values.windows(2) {
            let gap = w[1] - w[0];
            // ignore float noise between nominally equal coordinates
            if gap > 1e-9 * w[1].abs().max(1.0) {
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
            }
        }
    }
    best
}

/// Comment header echoing how a phantom was generated.
pub fn phantom_header(spec: &PhantomSpec, count: usize) -> Vec<String> {
    let mut line = String::new();
    let _ = write!(
        line,
        "procedural phantom height={} resolution={} margin={} voxels={}",
        spec.height, spec.resolution, spec.margin, count
    );
    vec![line, "x,y,z in meters".to_string()]
}
