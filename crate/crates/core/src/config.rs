//! Experiment configuration: a single JSON document with dotted-path
//! overrides, plus the generators that turn the declarative document into
//! concrete grids, test families, kernels, and per-level solver configs.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::kernels::{EnvelopeTable, LagrangianKernel};
use crate::solver::SolverConfig;
use crate::space::{build_test_family, random_operator_point, Ball, Point, TestSet, TestSetFamily};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub kernel: KernelConfig,
    pub grids: Vec<GridSpec>,
    pub family: FamilyConfig,
    pub solver: SolverParams,
    pub checks: ChecksConfig,
    pub output: OutputConfig,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Realization {
    Euclidean,
    Operator,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpaceConfig {
    pub realization: Realization,
    pub dims_per_level: usize,
    pub max_level: u32,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelConfig {
    BoundedRange {
        c: f64,
        r: f64,
        p: f64,
    },
    EntropyVanishing {
        c: f64,
        delta: f64,
        f_table: Vec<(f64, f64)>,
        exhaustion_radii: Vec<f64>,
        sample_budget: usize,
    },
    CausalFermion {
        s: usize,
        n: usize,
        c: f64,
    },
    UserTable {
        table: Vec<(f64, f64)>,
        c: f64,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridSpec {
    Lattice {
        level: u32,
        /// One (lo, hi) range per coordinate of the level's slice.
        ranges: Vec<(f64, f64)>,
        /// Lattice steps per axis.
        steps: Vec<usize>,
    },
    RandomOperators {
        level: u32,
        count: usize,
    },
}

impl GridSpec {
    pub fn level(&self) -> u32 {
        match self {
            GridSpec::Lattice { level, .. } | GridSpec::RandomOperators { level, .. } => *level,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyConfig {
    /// Every n-th grid point joins the dense sample.
    pub sample_stride: usize,
    pub radii: Vec<f64>,
    pub union_depth: u32,
    pub cap: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolverParams {
    pub initial_volume: f64,
    pub max_outer_iters: usize,
    pub qp_tolerance: f64,
    pub insertion_tolerance: f64,
    pub weight_floor: f64,
    pub normalize_to_one: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChecksConfig {
    pub phi_properties: bool,
    pub condition_b: Option<ConditionBConfig>,
    pub condition_iv: bool,
    pub minimality: Option<MinimalityConfig>,
    pub closure: Option<ClosureConfig>,
    pub dimension: Option<DimensionConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionBConfig {
    pub eps: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinimalityConfig {
    pub trials: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosureConfig {
    pub s: usize,
    pub n: usize,
    pub trials: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionConfig {
    pub radii: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: String,
    pub formats: Vec<String>,
}

impl ExperimentConfig {
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: serde_json::Value = serde_json::from_str(&text)?;
        for ov in overrides {
            apply_override(&mut value, ov)?;
        }
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.space.max_level < 1 {
            return Err(Error::Config("max_level must be at least 1".into()));
        }
        if self.space.dims_per_level == 0 {
            return Err(Error::Config("dims_per_level must be positive".into()));
        }
        if self.grids.is_empty() {
            return Err(Error::Config("at least one grid is required".into()));
        }
        for w in self.grids.windows(2) {
            if w[1].level() <= w[0].level() {
                return Err(Error::Config(
                    "grid levels must strictly increase".into(),
                ));
            }
        }
        if self.grids.last().unwrap().level() > self.space.max_level {
            return Err(Error::Config("grid level exceeds max_level".into()));
        }
        if self.family.sample_stride == 0 {
            return Err(Error::Config("family sample_stride must be positive".into()));
        }
        if let Some(b) = &self.checks.condition_b {
            if b.eps <= 0.0 {
                return Err(Error::Config("condition_b.eps must be positive".into()));
            }
        }
        if let Some(m) = &self.checks.minimality {
            if m.trials == 0 {
                return Err(Error::Config("minimality.trials must be positive".into()));
            }
        }
        if self.solver.initial_volume <= 0.0 {
            return Err(Error::Config("solver.initial_volume must be positive".into()));
        }
        match (&self.space.realization, &self.kernel) {
            (Realization::Euclidean, KernelConfig::CausalFermion { .. }) => {
                return Err(Error::Config(
                    "causal fermion kernel requires the operator realization".into(),
                ))
            }
            (Realization::Operator, KernelConfig::EntropyVanishing { .. }) => {
                return Err(Error::Config(
                    "entropy-vanishing kernel is only wired for the Euclidean realization".into(),
                ))
            }
            _ => {}
        }
        Ok(())
    }

    pub fn build_kernel(&self) -> Result<LagrangianKernel> {
        match &self.kernel {
            KernelConfig::BoundedRange { c, r, p } => LagrangianKernel::bounded_range(*c, *r, *p),
            KernelConfig::EntropyVanishing {
                c,
                delta,
                f_table,
                exhaustion_radii,
                sample_budget,
            } => {
                let envelope = EnvelopeTable::new(f_table.clone())?;
                let origin = Point::euclidean(1, vec![0.0; self.space.dims_per_level])?;
                let exhaustion: Vec<TestSet> = exhaustion_radii
                    .iter()
                    .enumerate()
                    .map(|(i, r)| TestSet {
                        id: i as i64,
                        balls: vec![Ball {
                            center: origin.clone(),
                            radius: *r,
                            level: ((i as u32) + 1).min(self.space.max_level),
                        }],
                    })
                    .collect();
                LagrangianKernel::entropy_vanishing(
                    *c,
                    *delta,
                    envelope,
                    exhaustion,
                    *sample_budget,
                    crate::named_seed(self.space.seed, "entropy"),
                )
            }
            KernelConfig::CausalFermion { s, n, c } => LagrangianKernel::causal_fermion(*s, *n, *c),
            KernelConfig::UserTable { table, c } => {
                LagrangianKernel::user_table(EnvelopeTable::new(table.clone())?, *c)
            }
        }
    }

    pub fn build_grid(&self, spec: &GridSpec) -> Result<Vec<Point>> {
        match spec {
            GridSpec::Lattice {
                level,
                ranges,
                steps,
            } => {
                let dims = *level as usize * self.space.dims_per_level;
                if ranges.len() != dims || steps.len() != dims {
                    return Err(Error::Config(format!(
                        "lattice at level {level} needs {dims} ranges and steps, got {} and {}",
                        ranges.len(),
                        steps.len()
                    )));
                }
                if steps.iter().any(|s| *s == 0) {
                    return Err(Error::Config("lattice steps must be positive".into()));
                }
                let mut points = Vec::new();
                let mut idx = vec![0usize; dims];
                loop {
                    let coords: Vec<f64> = (0..dims)
                        .map(|d| {
                            let (lo, hi) = ranges[d];
                            if steps[d] == 1 {
                                (lo + hi) / 2.0
                            } else {
                                lo + (hi - lo) * idx[d] as f64 / (steps[d] - 1) as f64
                            }
                        })
                        .collect();
                    points.push(Point::euclidean(*level, coords)?);
                    // odometer increment
                    let mut d = 0;
                    loop {
                        if d == dims {
                            return Ok(points);
                        }
                        idx[d] += 1;
                        if idx[d] < steps[d] {
                            break;
                        }
                        idx[d] = 0;
                        d += 1;
                    }
                }
            }
            GridSpec::RandomOperators { level, count } => {
                let (s, n) = match &self.kernel {
                    KernelConfig::CausalFermion { s, n, .. } => (*s, *n),
                    _ => {
                        return Err(Error::Config(
                            "random operator grids require the causal fermion kernel".into(),
                        ))
                    }
                };
                let mut rng = ChaCha8Rng::seed_from_u64(crate::named_seed(
                    self.space.seed,
                    &format!("grid-level-{level}"),
                ));
                (0..*count)
                    .map(|_| Point::operator(*level, random_operator_point(s, n, &mut rng)))
                    .collect()
            }
        }
    }

    pub fn build_solver_configs(&self) -> Result<Vec<SolverConfig>> {
        self.grids
            .iter()
            .map(|spec| {
                Ok(SolverConfig {
                    level: spec.level(),
                    candidate_grid: self.build_grid(spec)?,
                    initial_volume: self.solver.initial_volume,
                    max_outer_iters: self.solver.max_outer_iters,
                    qp_tolerance: self.solver.qp_tolerance,
                    insertion_tolerance: self.solver.insertion_tolerance,
                    weight_floor: self.solver.weight_floor,
                    seed: self.space.seed,
                    normalize_to_one: self.solver.normalize_to_one,
                })
            })
            .collect()
    }

    pub fn build_family(&self) -> Result<TestSetFamily> {
        let mut sample = Vec::new();
        for spec in &self.grids {
            let grid = self.build_grid(spec)?;
            sample.extend(grid.into_iter().step_by(self.family.sample_stride));
        }
        build_test_family(
            &sample,
            &self.family.radii,
            self.family.union_depth,
            self.family.cap,
            self.space.max_level,
        )
    }

    /// A bounded set comfortably containing every grid point, for the
    /// condition (B) bookkeeping.
    pub fn bounding_set(&self) -> Result<TestSet> {
        let mut radius = 1.0f64;
        for spec in &self.grids {
            for p in self.build_grid(spec)? {
                let norm = match p.coords() {
                    Some(c) => c.iter().map(|x| x * x).sum::<f64>().sqrt(),
                    None => p
                        .as_operator()
                        .map(|op| op.eigenvalues().iter().fold(0.0f64, |m, l| m.max(l.abs())))
                        .unwrap_or(0.0),
                };
                radius = radius.max(norm + 1.0);
            }
        }
        let center = match self.space.realization {
            Realization::Euclidean => Point::euclidean(1, vec![0.0; self.space.dims_per_level])?,
            Realization::Operator => {
                let (s, n) = match &self.kernel {
                    KernelConfig::CausalFermion { s, n, .. } => (*s, *n),
                    _ => (1, 4),
                };
                Point::operator(1, crate::space::OperatorPoint::zero(s, n))?
            }
        };
        Ok(TestSet {
            id: -2,
            balls: vec![Ball {
                center,
                radius,
                level: self.space.max_level,
            }],
        })
    }
}

/// Applies one `path.to.field=json_value` override to the raw config value.
fn apply_override(value: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{spec}' is not of the form path=value")))?;
    let new: serde_json::Value = serde_json::from_str(raw)
        .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let segments: Vec<&str> = path.split('.').collect();
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        match cursor {
            serde_json::Value::Object(map) => {
                if last {
                    map.insert((*seg).to_string(), new);
                    return Ok(());
                }
                cursor = map
                    .entry((*seg).to_string())
                    .or_insert(serde_json::Value::Object(Default::default()));
            }
            serde_json::Value::Array(arr) => {
                let idx: usize = seg.parse().map_err(|_| {
                    Error::Config(format!("override segment '{seg}' is not an array index"))
                })?;
                let slot = arr.get_mut(idx).ok_or_else(|| {
                    Error::Config(format!("override index {idx} out of bounds"))
                })?;
                if last {
                    *slot = new;
                    return Ok(());
                }
                cursor = slot;
            }
            _ => {
                return Err(Error::Config(format!(
                    "override path '{path}' crosses a scalar at '{seg}'"
                )))
            }
        }
    }
    Ok(())
}
