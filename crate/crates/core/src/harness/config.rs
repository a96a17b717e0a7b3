use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::exact::parse_rational;
use crate::maps::{MapModel, Point, StochasticMatrix};
use crate::measures::{EntropyMethod, InvariantMeasure};
use crate::recurrence::{Engine, Schedule, TargetPoint};
use crate::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Classify,
    Entropy,
    Bounds,
    Cantor,
    Gridprobe,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Classify => "classify",
            Experiment::Entropy => "entropy",
            Experiment::Bounds => "bounds",
            Experiment::Cantor => "cantor",
            Experiment::Gridprobe => "gridprobe",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapSpec {
    DaryShift { digits: u32 },
    /// Row-major stochastic matrix of `"num/den"` entries.
    MarkovLinear {
        matrix: Vec<Vec<String>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        stationary: Option<Vec<String>>,
    },
    Bernoulli { p: Vec<String> },
    Gauss,
    /// Zeros as `[re, im]` pairs.
    Blaschke { zeros: Vec<[f64; 2]> },
}

impl MapSpec {
    pub fn build(&self) -> crate::Result<MapModel> {
        match self {
            MapSpec::DaryShift { digits } => MapModel::dary_shift(*digits),
            MapSpec::MarkovLinear { matrix, stationary } => {
                let m = StochasticMatrix::parse(matrix)?;
                match stationary {
                    Some(p) => MapModel::markov_linear_with(m, p.iter().map(|s| parse_rational(s)).collect::<Result<_, _>>()?),
                    None => MapModel::markov_linear(m),
                }
            }
            MapSpec::Bernoulli { p } => MapModel::bernoulli(&p.iter().map(|s| parse_rational(s)).collect::<Result<Vec<_>, _>>()?),
            MapSpec::Gauss => Ok(MapModel::gauss()),
            MapSpec::Blaschke { zeros } => MapModel::blaschke(zeros.iter().map(|z| Complex64::new(z[0], z[1])).collect()),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpec {
    /// The invariant measure that comes with the map.
    #[default]
    Natural,
    Lebesgue,
    Gauss,
    Markov,
}

impl MeasureSpec {
    pub fn build(self, map: &MapModel) -> crate::Result<InvariantMeasure> {
        let m = match self {
            MeasureSpec::Natural => InvariantMeasure::natural_for(map),
            MeasureSpec::Lebesgue => InvariantMeasure::Lebesgue,
            MeasureSpec::Gauss => InvariantMeasure::Gauss,
            MeasureSpec::Markov => InvariantMeasure::markov(
                map.markov().ok_or_else(|| Error::Unsupported("Markov measure needs a Markov map".into()))?,
            ),
        };
        if !m.compatible_with(map) {
            return Err(Error::Unsupported(format!("{} measure is not invariant for {}", m.name(), map.name())));
        }
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// `"num/den"`, a decimal, or an integer.
    Point { x: String },
    /// The point whose itinerary repeats `word` forever.
    Periodic { word: Vec<u32> },
}

impl TargetSpec {
    pub fn build(&self, map: &MapModel, mu: &InvariantMeasure) -> crate::Result<TargetPoint> {
        match self {
            TargetSpec::Point { x } => TargetPoint::from_point(map, mu, Point::Exact(parse_rational(x)?)),
            TargetSpec::Periodic { word } => TargetPoint::periodic(map, mu, word),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridConfig {
    Dyadic,
    Rectangles { a: f64, b: f64 },
    /// Cylinders of the configured map.
    Cylinders,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: String,
    /// Any of `json`, `csv`, `table`, `plot`.
    pub formats: Vec<String>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "out".into(), formats: ["json", "csv", "table", "plot"].map(String::from).to_vec() }
    }
}

pub const FORMATS: [&str; 4] = ["json", "csv", "table", "plot"];

fn default_horizons() -> Vec<u64> {
    vec![10_000]
}
fn default_trials() -> u64 {
    20
}
fn default_entropy_method() -> EntropyMethod {
    EntropyMethod::Birkhoff
}
fn default_levels() -> Vec<usize> {
    vec![8, 12]
}
fn default_cap() -> f64 {
    1e3
}
fn default_grid() -> GridConfig {
    GridConfig::Dyadic
}
fn default_k_max() -> usize {
    40
}
fn default_precision() -> u32 {
    crate::coding::DEFAULT_PRECISION_BITS
}
fn default_dump() -> usize {
    64
}

/// One experiment. Every optional field has a default, and the output
/// echoes the config with those defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub map: MapSpec,
    #[serde(default)]
    pub measure: MeasureSpec,
    #[serde(default)]
    pub target: Option<TargetSpec>,
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: Option<Engine>,
    #[serde(default = "default_entropy_method")]
    pub entropy_method: EntropyMethod,
    /// Level sizes `N_j` of a Cantor stage.
    #[serde(default = "default_levels")]
    pub levels: Vec<usize>,
    #[serde(default = "default_cap")]
    pub frostman_cap: f64,
    /// Blocks per level listed in the stage dump.
    #[serde(default = "default_dump")]
    pub dump_blocks: usize,
    #[serde(default = "default_grid")]
    pub grid: GridConfig,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Extra radii rates `κ` tabulated by the bounds experiment.
    #[serde(default)]
    pub kappa_grid: Vec<f64>,
    /// Mantissa bits for Gauss cylinder endpoints past the exact depth cap.
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// A runnable config for `experiment` when no file is given.
    pub fn default_for(experiment: Experiment) -> Self {
        let base = |map: MapSpec| ExperimentConfig {
            experiment,
            map,
            measure: MeasureSpec::Natural,
            target: None,
            schedule: None,
            horizons: default_horizons(),
            trials: default_trials(),
            seed: 0,
            engine: None,
            entropy_method: default_entropy_method(),
            levels: default_levels(),
            frostman_cap: default_cap(),
            dump_blocks: default_dump(),
            grid: default_grid(),
            k_max: default_k_max(),
            kappa_grid: Vec::new(),
            precision_bits: default_precision(),
            workers: 0,
            output: OutputConfig::default(),
        };
        let half = || vec!["1/2".to_string(), "1/2".to_string()];
        match experiment {
            Experiment::Simulate | Experiment::Classify => ExperimentConfig {
                target: Some(TargetSpec::Periodic { word: vec![0, 1] }),
                schedule: Some(Schedule::DepthLogFloor { base: 2.0 }),
                ..base(MapSpec::Bernoulli { p: half() })
            },
            Experiment::Entropy => ExperimentConfig { horizons: vec![100_000], trials: 10, ..base(MapSpec::Gauss) },
            Experiment::Bounds => ExperimentConfig {
                target: Some(TargetSpec::Periodic { word: vec![1] }),
                schedule: Some(Schedule::RadiiExp { kappa: 1.0 }),
                kappa_grid: vec![0.25, 0.5, 1.0, 2.0, 4.0],
                ..base(MapSpec::Gauss)
            },
            Experiment::Cantor => ExperimentConfig {
                target: Some(TargetSpec::Point { x: "1/3".into() }),
                schedule: Some(Schedule::RadiiExp { kappa: std::f64::consts::LN_2 }),
                ..base(MapSpec::DaryShift { digits: 2 })
            },
            Experiment::Gridprobe => base(MapSpec::DaryShift { digits: 2 }),
        }
    }

    /// Every problem with the config, not just the first.
    ///
    /// Numerical failures such as a non-primitive matrix are left for `run`
    /// to report, since they are not mistakes in the config's shape.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let note = |v: &mut Vec<String>, field: &str, e: crate::Error| {
            if !e.is_numerical() {
                v.push(format!("{field}: {e}"));
            }
        };
        let map = match self.map.build() {
            Ok(m) => Some(m),
            Err(e) => {
                note(&mut v, "map", e);
                None
            }
        };
        let mu = map.as_ref().and_then(|m| match self.measure.build(m) {
            Ok(mu) => Some(mu),
            Err(e) => {
                note(&mut v, "measure", e);
                None
            }
        });
        if let Some(s) = &self.schedule {
            if let Err(e) = s.validate() {
                v.push(format!("schedule: {e}"));
            }
        }
        if let (Some(t), Some(m), Some(mu)) = (&self.target, &map, &mu) {
            if let Err(e) = t.build(m, mu) {
                note(&mut v, "target", e);
            }
        }
        if self.horizons.is_empty() {
            v.push("horizons: list is empty".into());
        }
        if self.horizons.contains(&0) {
            v.push("horizons: entries must be positive".into());
        }
        if self.trials == 0 {
            v.push("trials: must be positive".into());
        }
        if !(64..=8192).contains(&self.precision_bits) {
            v.push("precision_bits: must lie in 64..=8192".into());
        }
        for f in &self.output.formats {
            if !FORMATS.contains(&f.as_str()) {
                v.push(format!("output.formats: unknown format {f:?}"));
            }
        }
        let needs = |v: &mut Vec<String>, what: &str, ok: bool| {
            if !ok {
                v.push(format!("{what}: required by the {} experiment", self.experiment.name()));
            }
        };
        match self.experiment {
            Experiment::Simulate | Experiment::Classify | Experiment::Bounds | Experiment::Cantor => {
                needs(&mut v, "target", self.target.is_some());
                needs(&mut v, "schedule", self.schedule.is_some());
            }
            Experiment::Entropy => {
                if self.entropy_method == EntropyMethod::Smb {
                    needs(&mut v, "target", self.target.is_some());
                }
            }
            Experiment::Gridprobe => {
                if let GridConfig::Rectangles { a, b } = self.grid {
                    if !(0.0 < a && a < 1.0 && 0.0 < b && b < 1.0) {
                        v.push("grid: rectangle cuts must lie in (0,1)".into());
                    }
                }
                if self.k_max == 0 {
                    v.push("k_max: must be positive".into());
                }
            }
        }
        if self.experiment == Experiment::Cantor {
            if self.levels.is_empty() || self.levels.len() > 3 || self.levels.contains(&0) {
                v.push("levels: need 1 to 3 positive sizes".into());
            }
            if !(self.frostman_cap >= 1.0) {
                v.push("frostman_cap: must be at least 1".into());
            }
        }
        if self.kappa_grid.iter().any(|k| !(*k >= 0.0)) {
            v.push("kappa_grid: rates must be non-negative".into());
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_filled_and_round_trip() {
        let c = ExperimentConfig::from_json(r#"{"experiment":"entropy","map":{"kind":"gauss"}}"#).unwrap();
        assert_eq!(c.trials, 20);
        assert_eq!(c.output.formats.len(), 4);
        let back = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(back, c);
        for e in [Experiment::Simulate, Experiment::Bounds, Experiment::Cantor, Experiment::Gridprobe] {
            let c = ExperimentConfig::default_for(e);
            assert!(c.violations().is_empty(), "{:?}", c.violations());
            assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        }
    }

    #[test]
    fn every_violation_is_listed() {
        let mut c = ExperimentConfig::default_for(Experiment::Simulate);
        c.horizons.clear();
        c.trials = 0;
        c.output.formats.push("xml".into());
        c.schedule = Some(Schedule::RadiiPower { alpha: -1.0 });
        let v = c.violations();
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn bad_map_and_target() {
        let c = ExperimentConfig::from_json(
            r#"{"experiment":"classify","map":{"kind":"markov_linear","matrix":[["1/2","1/2"],["1","0"]]},
                "target":{"kind":"periodic","word":[1,1]},"schedule":{"kind":"radii_power","alpha":2.0}}"#,
        )
        .unwrap();
        assert_eq!(c.violations().len(), 1);
        assert!(ExperimentConfig::from_json(r#"{"experiment":"entropy","map":{"kind":"gauss"},"typo":1}"#).is_err());
    }
}
