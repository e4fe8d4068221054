//! Experiment spec files and `key=value` overrides.
//!
//! A spec is a TOML document with one level of sections:
//!
//! ```toml
//! name = "ls-sweep"
//!
//! [generator]
//! loss = "least_squares"   # least_squares | ridge | logistic
//! lambda = 0.0             # ridge penalty
//! dim = 5
//! features = "ball"        # ball | point
//! radius = 1.0
//! noise = 0.5
//!
//! [optimizer]
//! alpha = [0.25, 0.5, 1.0]
//! k = [5]
//! outer_steps = [20]
//! batch = [1, 4]
//! n = [64]
//! eta_l = [0.5]            # step sizes as multiples of 1/L
//!
//! [monte_carlo]
//! datasets = 8
//! indices = 16
//! seeds = 4
//! seed = 0
//! ```
//!
//! Every key has a default, so any section or key may be omitted.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::coupling::{MonteCarloPlan, StabilityTarget};
use crate::error::{Error, Result};
use crate::optimizer::{LookaheadConfig, RecordLevel};
use crate::problems::{FeatureDist, GeneratorSpec, LossKind, LossModel, Weights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossName {
    LeastSquares,
    Ridge,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureName {
    Ball,
    Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub loss: LossName,
    pub lambda: f64,
    pub dim: usize,
    pub features: FeatureName,
    pub radius: f64,
    /// The feature vector of a point-mass generator.
    pub point: Vec<f64>,
    pub noise: f64,
    /// Label-noise truncation in standard deviations.
    pub label_clip: f64,
    /// Empty means `(1, ..., 1) / sqrt(dim)`.
    pub w_true: Vec<f64>,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        GeneratorSection {
            loss: LossName::LeastSquares,
            lambda: 0.0,
            dim: 5,
            features: FeatureName::Ball,
            radius: 1.0,
            point: Vec::new(),
            noise: 0.5,
            label_clip: 5.0,
            w_true: Vec::new(),
        }
    }
}

impl GeneratorSection {
    pub fn to_spec(&self) -> Result<GeneratorSpec> {
        let kind = match self.loss {
            LossName::LeastSquares => LossKind::LeastSquares,
            LossName::Ridge => LossKind::Ridge { lambda: self.lambda },
            LossName::Logistic => LossKind::Logistic,
        };
        let mut spec = GeneratorSpec::ball(kind, self.dim, self.radius, self.noise);
        spec.label_clip = self.label_clip;
        if self.features == FeatureName::Point {
            spec.features = FeatureDist::Point { x: self.point.clone() };
        }
        if !self.w_true.is_empty() {
            spec.w_true = self.w_true.clone();
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Hyperparameter source for the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// Use the listed step sizes, `k` and `outer_steps`.
    None,
    /// Step size and iteration budget from the convex excess-risk rate;
    /// `k` is taken from the grid and `T = ceil(R / k)`.
    Convex,
    /// Step size, `k` and `T` from the strongly convex excess-risk rate.
    StronglyConvex,
}

/// Which iterate the risk experiments evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputIterate {
    /// The averaged fast iterate for convex losses, `w_T` otherwise.
    Auto,
    Slow,
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub alpha: Vec<f64>,
    pub k: Vec<usize>,
    pub outer_steps: Vec<usize>,
    pub batch: Vec<usize>,
    pub n: Vec<usize>,
    /// Absolute step sizes; takes precedence over `eta_l`.
    pub eta: Vec<f64>,
    /// Step sizes in units of `1/L`.
    pub eta_l: Vec<f64>,
    pub preset: Preset,
    /// Multiplier of `ln(mu n)` in the strongly convex preset.
    pub c_t: f64,
    /// Starting point; empty means zero.
    pub w0: Vec<f64>,
    pub output: OutputIterate,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        OptimizerSection {
            alpha: vec![0.5],
            k: vec![5],
            outer_steps: vec![20],
            batch: vec![1],
            n: vec![64],
            eta: Vec::new(),
            eta_l: vec![0.5],
            preset: Preset::None,
            c_t: 1.0,
            w0: Vec::new(),
            output: OutputIterate::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloSection {
    pub datasets: usize,
    /// Replaced indices per dataset (stability) and unused otherwise.
    pub indices: usize,
    /// Algorithm seeds per dataset (risk) or per replaced index (stability).
    pub seeds: usize,
    /// Held-out sample size for population risk without a closed form.
    pub heldout: usize,
    pub seed: u64,
    /// Sample size for estimating `F(w*)` without a closed form.
    pub f_star_samples: usize,
    /// Measure stability on the averaged fast iterate instead of `w_T`.
    pub averaged_target: bool,
}

impl Default for MonteCarloSection {
    fn default() -> Self {
        MonteCarloSection {
            datasets: 8,
            indices: 16,
            seeds: 4,
            heldout: 100_000,
            seed: 0,
            f_star_samples: 1_000_000,
            averaged_target: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// CSV file name inside the output directory; empty means `<command>.csv`.
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub generator: GeneratorSection,
    pub optimizer: OptimizerSection,
    pub monte_carlo: MonteCarloSection,
    pub output: OutputSection,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            name: "experiment".into(),
            generator: GeneratorSection::default(),
            optimizer: OptimizerSection::default(),
            monte_carlo: MonteCarloSection::default(),
            output: OutputSection::default(),
        }
    }
}

/// One point of the hyperparameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub config: LookaheadConfig,
    pub n: usize,
    /// `gamma` of the convex preset, when used.
    pub gamma: Option<f64>,
    pub notes: Vec<String>,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let o = &self.optimizer;
        let grids: [(&str, bool); 5] = [
            ("alpha", o.alpha.is_empty()),
            ("k", o.k.is_empty()),
            ("outer_steps", o.outer_steps.is_empty() && o.preset == Preset::None),
            ("batch", o.batch.is_empty()),
            ("n", o.n.is_empty()),
        ];
        if let Some((name, _)) = grids.iter().find(|(_, empty)| *empty) {
            return Err(Error::Config(format!("optimizer.{name} must not be empty")));
        }
        if o.preset == Preset::None && o.eta.is_empty() && o.eta_l.is_empty() {
            return Err(Error::Config("give optimizer.eta or optimizer.eta_l".into()));
        }
        let m = &self.monte_carlo;
        if m.datasets == 0 || m.indices == 0 || m.seeds == 0 {
            return Err(Error::Config("monte_carlo counts must be positive".into()));
        }
        if !o.w0.is_empty() && o.w0.len() != self.generator.dim {
            return Err(Error::Dimension { expected: self.generator.dim, got: o.w0.len() });
        }
        self.generator.to_spec()?;
        Ok(())
    }

    pub fn generator_spec(&self) -> Result<GeneratorSpec> {
        self.generator.to_spec()
    }

    pub fn plan(&self) -> MonteCarloPlan {
        let m = &self.monte_carlo;
        MonteCarloPlan {
            datasets: m.datasets,
            indices_per_dataset: m.indices,
            seeds_per_index: m.seeds,
            base_seed: m.seed,
            target: if m.averaged_target { StabilityTarget::AveragedFast } else { StabilityTarget::FinalSlow },
        }
    }

    /// Expands the grid in the order `n, batch, k, alpha, outer_steps, eta`,
    /// resolving presets. Presets need `f_star` for the convex case.
    pub fn grid(&self, model: &LossModel, f_star: Option<f64>) -> Result<Vec<GridCell>> {
        let o = &self.optimizer;
        let w0 = (!o.w0.is_empty()).then(|| Weights::from_vec(o.w0.clone()));
        let l = model.smoothness();
        let etas: Vec<f64> = if o.eta.is_empty() { o.eta_l.iter().map(|m| m / l).collect() } else { o.eta.clone() };
        let mut cells = Vec::new();
        for &n in &o.n {
            for &b in &o.batch {
                // The strongly convex preset chooses k itself.
                let ks = if o.preset == Preset::StronglyConvex { &o.k[..1] } else { &o.k[..] };
                for &k in ks {
                    for &alpha in &o.alpha {
                        let make = |k: usize, t: usize, eta: f64| {
                            let mut c = LookaheadConfig::new(alpha, k, t, eta, b, self.monte_carlo.seed).with_record(RecordLevel::Full);
                            c.w0 = w0.clone();
                            c
                        };
                        match o.preset {
                            Preset::None => {
                                for &t in &o.outer_steps {
                                    for &eta in &etas {
                                        cells.push(GridCell { config: make(k, t, eta), n, gamma: None, notes: Vec::new() });
                                    }
                                }
                            }
                            Preset::Convex => {
                                let f_star = f_star.ok_or_else(|| Error::MissingData("convex preset needs F(w*)".into()))?;
                                let p = crate::bounds::preset_convex(f_star, n, l, b)?;
                                let mut notes = Vec::new();
                                if !p.valid {
                                    notes.push(format!("batch {b} exceeds sqrt(n F(w*)) / (2L)"));
                                }
                                let t = p.total_steps.div_ceil(k);
                                cells.push(GridCell { config: make(k, t, p.eta), n, gamma: Some(p.gamma), notes });
                            }
                            Preset::StronglyConvex => {
                                let p = crate::bounds::preset_strongly_convex(l, model.strong_convexity(), alpha, b, n, o.c_t)?;
                                cells.push(GridCell { config: make(p.k, p.outer_steps, p.eta), n, gamma: None, notes: p.warnings });
                            }
                        }
                    }
                }
            }
        }
        Ok(cells)
    }
}

/// Applies `key=value` overrides to any serializable settings struct.
///
/// Keys are either `section.key` or a bare key that names exactly one field
/// across the top level and all sections. Values are TOML literals; anything
/// that does not parse as one is taken as a string. A scalar assigned to a
/// list field becomes a one-element list. The result is deserialized again,
/// so type errors and unknown keys are rejected.
pub fn apply_overrides<T>(settings: &T, overrides: &[(String, String)]) -> Result<T>
where
    T: Serialize + DeserializeOwned,
{
    let mut table = toml::Table::try_from(settings).map_err(|e| Error::Config(e.to_string()))?;
    for (key, raw) in overrides {
        let slot = locate(&mut table, key)?;
        let value = coerce(parse_literal(raw), slot);
        *slot = value;
    }
    toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(format!("invalid override: {}", e.message())))
}

/// Splits `key=value`.
pub fn parse_override(text: &str) -> Result<(String, String)> {
    let (k, v) = text.split_once('=').ok_or_else(|| Error::Config(format!("override `{text}` is not key=value")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("override `{text}` has an empty key")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

fn locate<'a>(table: &'a mut toml::Table, key: &str) -> Result<&'a mut toml::Value> {
    let unknown = || Error::Config(format!("unknown key `{key}`"));
    if let Some((section, field)) = key.split_once('.') {
        return table
            .get_mut(section)
            .and_then(toml::Value::as_table_mut)
            .and_then(|t| t.get_mut(field))
            .ok_or_else(unknown);
    }
    let mut found: Vec<Option<String>> = Vec::new();
    if table.get(key).is_some_and(|v| !v.is_table()) {
        found.push(None);
    }
    for (name, value) in table.iter() {
        if value.as_table().is_some_and(|t| t.contains_key(key)) {
            found.push(Some(name.clone()));
        }
    }
    match found.as_slice() {
        [] => Err(unknown()),
        [None] => table.get_mut(key).ok_or_else(unknown),
        [Some(section)] => {
            let section = section.clone();
            table[&section].as_table_mut().and_then(|t| t.get_mut(key)).ok_or_else(unknown)
        }
        _ => Err(Error::Config(format!("key `{key}` is ambiguous; use section.{key}"))),
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

fn coerce(value: toml::Value, slot: &toml::Value) -> toml::Value {
    use toml::Value as V;
    let to_float = |v: V| match v {
        V::Integer(i) => V::Float(i as f64),
        other => other,
    };
    match slot {
        V::Array(existing) => {
            let floats = existing.first().is_some_and(V::is_float);
            let items = match value {
                V::Array(items) => items,
                scalar => vec![scalar],
            };
            V::Array(items.into_iter().map(|v| if floats { to_float(v) } else { v }).collect())
        }
        V::Float(_) => to_float(value),
        _ => value,
    }
}
