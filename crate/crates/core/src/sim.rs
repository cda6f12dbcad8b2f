//! Monte Carlo localization study over a voxel body.
//!
//! Every voxel is localized `runs_per_point` times. Each run draws a fresh
//! sensor orientation and one geomagnetic residual shared by all wire
//! readings of that run. Random streams are keyed by (seed, voxel index,
//! run index), so results do not depend on the number of worker threads.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::body::BodyModel;
use crate::fieldmodel::{
    earth_residual, flux_density_at, validate_saturation, EarthResidualBounds, Permeability,
    SaturationReport,
};
use crate::geometry::{random_rotation, Axis, WireSet};
use crate::locate::localize;
use crate::sensor::{measure, MagnetometerSpec, Measurement};
use crate::{Error, Result};

/// Numeric parameters of a Monte Carlo study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams {
    pub magnetometer: MagnetometerSpec,
    pub earth: EarthResidualBounds,
    pub mu: Permeability,
    pub runs_per_point: usize,
    pub seed: u64,
    pub saturation_limit: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            magnetometer: MagnetometerSpec::default(),
            earth: EarthResidualBounds::default(),
            mu: Permeability::default(),
            runs_per_point: 100,
            seed: 0,
            saturation_limit: crate::fieldmodel::DEFAULT_SATURATION_LIMIT,
        }
    }
}

/// Random stream for one run at one voxel.
pub fn run_stream(seed: u64, voxel_index: usize, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(voxel_index as u64);
    rng.set_word_pos((run as u128) << 32);
    rng
}

/// Outcome of a single localization attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub estimate: Vector3<f64>,
    /// Euclidean distance between estimate and truth.
    pub error: f64,
    /// Absolute per-axis coordinate errors.
    pub axis_errors: Vector3<f64>,
    pub saturated: bool,
}

/// One localization attempt of a nano-machine at `voxel`.
pub fn simulate_run(
    voxel: &Vector3<f64>,
    wireset: &WireSet,
    params: &SimParams,
    rng: &mut ChaCha8Rng,
) -> Result<RunOutcome> {
    let orientation = random_rotation(rng);
    let residual = earth_residual(&params.earth, rng);
    let measurements = wireset
        .wires()
        .iter()
        .enumerate()
        .map(|(i, wire)| {
            let field = flux_density_at(wire, voxel, params.mu)
                .map_err(|_| Error::OnWireAxis { wire: i })?;
            Ok(measure(
                &field,
                &residual,
                &orientation,
                &params.magnetometer,
                rng,
            ))
        })
        .collect::<Result<Vec<Measurement>>>()?;
    let position = localize(&measurements, wireset, params.mu)?;
    let diff = position.coords - voxel;
    Ok(RunOutcome {
        estimate: position.coords,
        error: diff.norm(),
        axis_errors: diff.abs(),
        saturated: position.saturated,
    })
}

/// Per-voxel averages over all successful runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResult {
    pub position: Vector3<f64>,
    pub mean_error: f64,
    pub mean_axis_errors: Vector3<f64>,
    pub saturated_runs: usize,
    pub failed_runs: usize,
}

impl PointResult {
    /// No run at this voxel produced a position; the means are NaN.
    pub fn all_failed(&self) -> bool {
        self.mean_error.is_nan()
    }
}

pub fn simulate_point(
    voxel_index: usize,
    voxel: &Vector3<f64>,
    wireset: &WireSet,
    params: &SimParams,
) -> PointResult {
    let mut rng = run_stream(params.seed, voxel_index, 0);
    let mut sum_error = 0.0;
    let mut sum_axes = Vector3::zeros();
    let (mut ok, mut saturated, mut failed) = (0usize, 0usize, 0usize);
    for run in 0..params.runs_per_point {
        rng.set_word_pos((run as u128) << 32);
        match simulate_run(voxel, wireset, params, &mut rng) {
            Ok(outcome) => {
                ok += 1;
                sum_error += outcome.error;
                sum_axes += outcome.axis_errors;
                saturated += usize::from(outcome.saturated);
            }
            Err(_) => failed += 1,
        }
    }
    let n = ok as f64;
    PointResult {
        position: *voxel,
        mean_error: if ok > 0 { sum_error / n } else { f64::NAN },
        mean_axis_errors: if ok > 0 {
            sum_axes / n
        } else {
            Vector3::repeat(f64::NAN)
        },
        saturated_runs: saturated,
        failed_runs: failed,
    }
}

/// Max and quartiles of one error quantity over voxels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quartiles {
    pub max: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
}

/// Linear interpolation between closest ranks on sorted data.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Quartiles {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyResults);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Ok(Quartiles {
            max: *sorted.last().unwrap(),
            q1: quantile(&sorted, 0.25),
            q2: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorStats {
    pub position: Quartiles,
    pub x: Quartiles,
    pub y: Quartiles,
    pub z: Quartiles,
    /// Voxels included (those with at least one successful run).
    pub points: usize,
}

/// Statistics over per-voxel means, skipping voxels where every run failed.
pub fn summarize(points: &[PointResult]) -> Result<ErrorStats> {
    let valid: Vec<&PointResult> = points.iter().filter(|p| !p.all_failed()).collect();
    if valid.is_empty() {
        return Err(Error::EmptyResults);
    }
    let collect = |f: &dyn Fn(&PointResult) -> f64| valid.iter().map(|p| f(p)).collect::<Vec<_>>();
    Ok(ErrorStats {
        position: Quartiles::of(&collect(&|p| p.mean_error))?,
        x: Quartiles::of(&collect(&|p| p.mean_axis_errors.x))?,
        y: Quartiles::of(&collect(&|p| p.mean_axis_errors.y))?,
        z: Quartiles::of(&collect(&|p| p.mean_axis_errors.z))?,
        points: valid.len(),
    })
}

impl ErrorStats {
    /// Table rows as (name, value in cm).
    pub fn rows(&self) -> Vec<(String, f64)> {
        let cm = 100.0;
        let named = [
            ("X", &self.x),
            ("Y", &self.y),
            ("Z", &self.z),
            ("position", &self.position),
        ];
        let mut rows = Vec::with_capacity(16);
        for prefix in ["Maximum", "Median", "1st quartile", "3rd quartile"] {
            for (label, q) in named {
                let v = match prefix {
                    "Maximum" => q.max,
                    "Median" => q.q2,
                    "1st quartile" => q.q1,
                    _ => q.q3,
                };
                rows.push((format!("{prefix} {label} error"), v * cm));
            }
        }
        rows
    }

    pub fn to_summary_text(&self) -> String {
        let mut s = String::from("# Position error summary, errors in cm over per-voxel means\n");
        let _ = writeln!(s, "points = {}", self.points);
        for (name, value) in self.rows() {
            let _ = writeln!(s, "{name} = {value:.4}");
        }
        s
    }
}

/// A prepared study: wires, body and parameters.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub wireset: WireSet,
    pub body: BodyModel,
    pub params: SimParams,
}

#[derive(Debug, Clone)]
pub struct ScenarioResult {
    pub points: Vec<PointResult>,
    pub stats: ErrorStats,
    pub saturation: SaturationReport,
}

/// Runs every voxel of the scenario on `threads` workers (0 = all cores).
///
/// The saturation guard runs first; a field above the limit aborts with
/// [`Error::Saturation`].
pub fn run_scenario(scenario: &Scenario, threads: usize) -> Result<ScenarioResult> {
    let params = &scenario.params;
    let saturation = validate_saturation(
        &scenario.wireset,
        &scenario.body,
        params.saturation_limit,
        params.mu,
    )?;
    if !saturation.ok {
        return Err(Error::Saturation {
            max_field: saturation.max_field,
            limit: saturation.limit,
        });
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let points: Vec<PointResult> = pool.install(|| {
        scenario
            .body
            .voxels()
            .par_iter()
            .enumerate()
            .map(|(i, v)| simulate_point(i, v, &scenario.wireset, params))
            .collect()
    });
    let stats = summarize(&points)?;
    Ok(ScenarioResult {
        points,
        stats,
        saturation,
    })
}

pub const POINTS_HEADER: &str = "x,y,z,mean_err,mean_ex,mean_ey,mean_ez,saturated_runs,failed_runs";

pub fn points_csv(points: &[PointResult]) -> String {
    let mut s = String::with_capacity(points.len() * 96);
    s.push_str(POINTS_HEADER);
    s.push('\n');
    for p in points {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            p.position.x,
            p.position.y,
            p.position.z,
            p.mean_error,
            p.mean_axis_errors.x,
            p.mean_axis_errors.y,
            p.mean_axis_errors.z,
            p.saturated_runs,
            p.failed_runs
        );
    }
    s
}

pub fn load_points(path: impl AsRef<Path>) -> Result<Vec<PointResult>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let err = |line: usize, msg: String| Error::VoxelFile {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut points = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if i == 0 {
            if line.trim() != POINTS_HEADER {
                return Err(err(1, format!("expected header {POINTS_HEADER:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(i + 1, format!("expected 9 fields, got {}", f.len())));
        }
        let num = |k: usize| -> Result<f64> {
            f[k].trim()
                .parse::<f64>()
                .map_err(|e| err(i + 1, format!("field {}: {e}", k + 1)))
        };
        let count = |k: usize| -> Result<usize> {
            f[k].trim()
                .parse::<usize>()
                .map_err(|e| err(i + 1, format!("field {}: {e}", k + 1)))
        };
        points.push(PointResult {
            position: Vector3::new(num(0)?, num(1)?, num(2)?),
            mean_error: num(3)?,
            mean_axis_errors: Vector3::new(num(4)?, num(5)?, num(6)?),
            saturated_runs: count(7)?,
            failed_runs: count(8)?,
        });
    }
    if points.is_empty() {
        return Err(Error::EmptyResults);
    }
    Ok(points)
}

/// Writes `points.csv`, `summary.txt` and `manifest.txt` into `dir`.
pub fn write_outputs(result: &ScenarioResult, manifest: &str, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, text: &str| {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    };
    write("points.csv", &points_csv(&result.points))?;
    write("summary.txt", &result.stats.to_summary_text())?;
    write("manifest.txt", manifest)
}

/// How a 2D error map is cut from the voxel results.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapMode {
    /// Voxels whose `axis` coordinate is within half a voxel of `coordinate`.
    Slice { axis: Axis, coordinate: f64 },
    /// Mean over the axis perpendicular to the plane spanned by `plane`.
    Projection { plane: [Axis; 2] },
}

/// Mean error map in cm. Rows run along `row_axis` from high to low,
/// columns along `col_axis` from low to high.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorGrid {
    pub col_axis: Axis,
    pub row_axis: Axis,
    pub col_coords: Vec<f64>,
    pub row_coords: Vec<f64>,
    pub cells: Vec<Vec<Option<f64>>>,
}

impl ErrorGrid {
    pub fn to_csv(&self) -> String {
        let mut s = format!("{}\\{}", self.row_axis.name(), self.col_axis.name());
        for c in &self.col_coords {
            let _ = write!(s, ",{c:.4}");
        }
        s.push('\n');
        for (r, row) in self.row_coords.iter().zip(&self.cells) {
            let _ = write!(s, "{r:.4}");
            for cell in row {
                match cell {
                    Some(v) => {
                        let _ = write!(s, ",{v:.4}");
                    }
                    None => s.push(','),
                }
            }
            s.push('\n');
        }
        s
    }

    /// Mean of the filled cells whose row coordinate lies in `[lo, hi]`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (r, row) in self.row_coords.iter().zip(&self.cells) {
            if *r < lo || *r > hi {
                continue;
            }
            for v in row.iter().flatten() {
                sum += v;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

/// Builds a 2D grid of per-voxel mean errors (cm).
pub fn export_error_map(
    points: &[PointResult],
    resolution: f64,
    mode: MapMode,
) -> Result<ErrorGrid> {
    let (col_axis, row_axis, selected): (Axis, Axis, Vec<&PointResult>) = match mode {
        MapMode::Slice { axis, coordinate } => {
            let [a, b] = axis.plane();
            let sel = points
                .iter()
                .filter(|p| !p.all_failed())
                .filter(|p| {
                    (p.position[axis.index()] - coordinate).abs() <= 0.5 * resolution * (1.0 + 1e-9)
                })
                .collect::<Vec<_>>();
            if sel.is_empty() {
                return Err(Error::EmptySlice { axis, coordinate });
            }
            (Axis::ALL[a], Axis::ALL[b], sel)
        }
        MapMode::Projection { plane } => {
            if plane[0] == plane[1] {
                return Err(Error::Config(
                    "projection plane needs two distinct axes".into(),
                ));
            }
            let sel = points
                .iter()
                .filter(|p| !p.all_failed())
                .collect::<Vec<_>>();
            if sel.is_empty() {
                return Err(Error::EmptyResults);
            }
            (plane[0], plane[1], sel)
        }
    };

    let (ci, ri) = (col_axis.index(), row_axis.index());
    let min_c = selected
        .iter()
        .map(|p| p.position[ci])
        .fold(f64::INFINITY, f64::min);
    let min_r = selected
        .iter()
        .map(|p| p.position[ri])
        .fold(f64::INFINITY, f64::min);
    let cell = |p: &PointResult| {
        (
            ((p.position[ci] - min_c) / resolution).round() as usize,
            ((p.position[ri] - min_r) / resolution).round() as usize,
        )
    };
    let (ncols, nrows) = selected
        .iter()
        .map(|p| cell(p))
        .fold((0, 0), |(c, r), (pc, pr)| (c.max(pc + 1), r.max(pr + 1)));

    let mut sum = vec![vec![0.0; ncols]; nrows];
    let mut count = vec![vec![0usize; ncols]; nrows];
    for p in &selected {
        let (c, r) = cell(p);
        sum[r][c] += p.mean_error * 100.0;
        count[r][c] += 1;
    }
    let mut cells = Vec::with_capacity(nrows);
    let mut row_coords = Vec::with_capacity(nrows);
    for r in (0..nrows).rev() {
        row_coords.push(min_r + r as f64 * resolution);
        cells.push(
            (0..ncols)
                .map(|c| (count[r][c] > 0).then(|| sum[r][c] / count[r][c] as f64))
                .collect(),
        );
    }
    Ok(ErrorGrid {
        col_axis,
        row_axis,
        col_coords: (0..ncols).map(|c| min_c + c as f64 * resolution).collect(),
        row_coords,
        cells,
    })
}

/// Smallest positive spacing between distinct coordinates of the points.
pub fn infer_resolution(points: &[PointResult]) -> Option<f64> {
    let mut best: Option<f64> = None;
    for axis in 0..3 {
        let mut values: Vec<f64> = points.iter().map(|p| p.position[axis]).collect();
        values.sort_by(f64::total_cmp);
        for w in values.windows(2) {
            let gap = w[1] - w[0];
            if gap > 1e-9 * w[1].abs().max(1.0) {
                best = Some(best.map_or(gap, |b: f64| b.min(gap)));
            }
        }
    }
    best
}
