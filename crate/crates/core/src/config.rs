//! Scenario configuration file.
//!
//! A TOML document with five sections. Every key has a default, so an empty
//! file describes the 6-wire, 100 A study on the default phantom.
//!
//! ```toml
//! [wires]
//! arrangement = "W6"       # or: file = "wires.toml"
//! clearance = 0.2          # meters, builtin cages only
//! current = 100.0          # amperes; overrides file currents when set
//! permeability = 1.2566370614359173e-6
//!
//! [magnetometer]
//! rel_error = 0.01
//! range_max_tesla = 0.12
//! noise_basis = "magnitude"  # or "component"
//!
//! [earth]
//! residual_nt = [131.0, 94.0, 157.0]  # northern, eastern, vertical
//! mapping = "xyz"                     # world axes of those components
//!
//! [phantom]
//! height = 1.75
//! resolution = 0.005
//! margin = 0.5
//! # file = "voxels.txt"
//!
//! [simulation]
//! runs_per_point = 100
//! seed = 0
//! threads = 0              # 0 = all cores
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::body::{generate_phantom_with, load_voxels, BodyModel, PhantomSpec};
use crate::fieldmodel::{
    EarthFrameMapping, EarthResidualBounds, Permeability, DEFAULT_SATURATION_LIMIT,
};
use crate::geometry::{arrangement_around, Arrangement, Axis, WireSet, DEFAULT_CLEARANCE};
use crate::sensor::{MagnetometerSpec, NoiseBasis};
use crate::sim::{Scenario, SimParams};
use crate::{Error, Result, MU_0};

/// Wire current for builtin cages when the config gives none, amperes.
pub const DEFAULT_CURRENT: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WiresSection {
    pub arrangement: Option<String>,
    pub file: Option<PathBuf>,
    pub clearance: f64,
    pub current: Option<f64>,
    pub permeability: f64,
}

impl Default for WiresSection {
    fn default() -> Self {
        WiresSection {
            arrangement: None,
            file: None,
            clearance: DEFAULT_CLEARANCE,
            current: None,
            permeability: MU_0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MagnetometerSection {
    pub rel_error: f64,
    pub range_max_tesla: f64,
    pub noise_basis: String,
}

impl Default for MagnetometerSection {
    fn default() -> Self {
        MagnetometerSection {
            rel_error: 0.01,
            range_max_tesla: 0.12,
            noise_basis: "magnitude".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarthSection {
    pub residual_nt: [f64; 3],
    pub mapping: String,
}

impl Default for EarthSection {
    fn default() -> Self {
        EarthSection {
            residual_nt: [131.0, 94.0, 157.0],
            mapping: "xyz".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhantomSection {
    pub height: f64,
    pub resolution: f64,
    pub margin: f64,
    pub file: Option<PathBuf>,
}

impl Default for PhantomSection {
    fn default() -> Self {
        let spec = PhantomSpec::default();
        PhantomSection {
            height: spec.height,
            resolution: spec.resolution,
            margin: spec.margin,
            file: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub runs_per_point: usize,
    pub seed: u64,
    pub threads: usize,
    pub saturation_limit_tesla: f64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            runs_per_point: 100,
            seed: 0,
            threads: 0,
            saturation_limit_tesla: DEFAULT_SATURATION_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub wires: WiresSection,
    pub magnetometer: MagnetometerSection,
    pub earth: EarthSection,
    pub phantom: PhantomSection,
    pub simulation: SimulationSection,
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: ScenarioConfig = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        config.params()?;
        config.arrangement()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ScenarioConfig::from_toml_str(&text)
    }

    /// Copy with the implicit arrangement and current written out.
    pub fn resolved(&self) -> ScenarioConfig {
        let mut c = self.clone();
        if c.wires.file.is_none() {
            let name = c.arrangement().ok().flatten().unwrap_or(Arrangement::W6);
            c.wires.arrangement = Some(name.to_string());
            c.wires.current.get_or_insert(DEFAULT_CURRENT);
        }
        c
    }

    /// Configuration as TOML, defaults filled in.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    fn arrangement(&self) -> Result<Option<Arrangement>> {
        match (&self.wires.arrangement, &self.wires.file) {
            (Some(_), Some(_)) => Err(Error::Config(
                "wires: set either arrangement or file, not both".into(),
            )),
            (Some(name), None) => name.parse().map(Some),
            (None, Some(_)) => Ok(None),
            (None, None) => Ok(Some(Arrangement::W6)),
        }
    }

    pub fn params(&self) -> Result<SimParams> {
        let m = &self.magnetometer;
        let magnetometer = MagnetometerSpec::new(
            m.rel_error,
            m.range_max_tesla,
            m.noise_basis.parse::<NoiseBasis>()?,
        )?;
        let [n, e, v] = self.earth.residual_nt;
        let earth = EarthResidualBounds::new(n / 1e9, e / 1e9, v / 1e9)?
            .with_mapping(parse_mapping(&self.earth.mapping)?);
        let sim = &self.simulation;
        if sim.runs_per_point == 0 {
            return Err(Error::Config("runs_per_point must be >= 1".into()));
        }
        if !(sim.saturation_limit_tesla.is_finite() && sim.saturation_limit_tesla > 0.0) {
            return Err(Error::Config(
                "saturation_limit_tesla must be positive".into(),
            ));
        }
        if let Some(c) = self.wires.current {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("current must be positive, got {c}")));
            }
        }
        Ok(SimParams {
            magnetometer,
            earth,
            mu: Permeability::new(self.wires.permeability)?,
            runs_per_point: sim.runs_per_point,
            seed: sim.seed,
            saturation_limit: sim.saturation_limit_tesla,
        })
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            height: self.phantom.height,
            resolution: self.phantom.resolution,
            margin: self.phantom.margin,
        }
    }

    pub fn body(&self) -> Result<BodyModel> {
        match &self.phantom.file {
            Some(path) => load_voxels(path),
            None => generate_phantom_with(&self.phantom_spec()),
        }
    }

    /// Wires for this scenario; builtin cages wrap `body`'s bounding box.
    pub fn wireset(&self, body: &BodyModel) -> Result<WireSet> {
        let current = self.wires.current.unwrap_or(DEFAULT_CURRENT);
        match self.arrangement()? {
            Some(name) => {
                arrangement_around(name, body.bounding_box(), self.wires.clearance, current)
            }
            None => {
                let path = self
                    .wires
                    .file
                    .as_ref()
                    .expect("file checked by arrangement()");
                let set = WireSet::load(path)?;
                match self.wires.current {
                    Some(c) => set.with_current(c),
                    None => Ok(set),
                }
            }
        }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let body = self.body()?;
        let wireset = self.wireset(&body)?;
        Ok(Scenario {
            wireset,
            body,
            params: self.params()?,
        })
    }

    /// Manifest text: resolved config, body summary and exact wire records.
    pub fn manifest(&self, scenario: &Scenario) -> String {
        let body = &scenario.body;
        let bb = body.bounding_box();
        let mut text = String::from("# magloc run manifest\n");
        text.push_str(&format!(
            "# voxels = {}, resolution = {} m, bbox = [{}, {}, {}] - [{}, {}, {}]\n\n",
            body.len(),
            body.resolution(),
            bb.min.x,
            bb.min.y,
            bb.min.z,
            bb.max.x,
            bb.max.y,
            bb.max.z
        ));
        text.push_str(&self.resolved().to_toml_string());
        text.push('\n');
        text.push_str(&scenario.wireset.to_toml_string());
        text
    }
}

fn parse_mapping(s: &str) -> Result<EarthFrameMapping> {
    let axes: Vec<Axis> = s
        .chars()
        .map(|c| c.to_string().parse::<Axis>())
        .collect::<Result<_>>()?;
    let axes: [Axis; 3] = axes
        .try_into()
        .map_err(|_| Error::Config(format!("earth mapping must name three axes, got {s:?}")))?;
    EarthFrameMapping::new(axes)
}
