//! Flat `key = value` experiment configs with `#` comments.
//!
//! ```text
//! experiment = decay
//! seed = 7
//! problem.p = 2,2
//! problem.resolution = 32
//! problem.initial = spike:1000
//! verify.window = 0.001,0.05
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use anisolab::{ExponentVector, Field, FluxModel, Forcing, Grid, ProblemSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const RECIPES: [&str; 9] = [
    "contraction",
    "decay",
    "universal",
    "regularize",
    "transfer",
    "steady",
    "sola",
    "structure",
    "exponents",
];

const KNOWN_KEYS: [&str; 38] = [
    "experiment",
    "seed",
    "parallel",
    "output",
    "problem.p",
    "problem.resolution",
    "problem.extents",
    "problem.flux",
    "problem.epsilon",
    "problem.h",
    "problem.t_final",
    "problem.dt",
    "problem.newton_tol",
    "problem.newton_max_iters",
    "problem.record_every",
    "problem.initial",
    "problem.initial_v",
    "problem.forcing",
    "problem.forcing_v",
    "verify.window",
    "verify.exponent_tol",
    "verify.t0",
    "verify.k",
    "verify.tail_start",
    "verify.threshold",
    "verify.levels",
    "verify.tolerance",
    "verify.scales",
    "verify.heights",
    "verify.samples",
    "verify.rel_tol",
    "verify.r",
    "verify.s",
    "verify.m",
    "verify.solver_tol",
    "verify.gamma",
    "verify.checkpoint",
    "verify.range",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "config line {l}, key `{}`: {}", self.key, self.message),
            None => write!(f, "config key `{}`: {}", self.key, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Initial datum or forcing description.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSpec {
    Zero,
    Constant(f64),
    /// Amplitude of the lowest Dirichlet mode.
    Mode(f64),
    /// Value at the node nearest the centre.
    Spike(f64),
    /// Seeded random field scaled by the value.
    Random(f64),
}

impl FieldSpec {
    fn parse(s: &str) -> Result<Self, String> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), Some(a.trim())),
            None => (s.trim(), None),
        };
        let num = |a: Option<&str>| -> Result<f64, String> {
            a.ok_or_else(|| format!("`{kind}` needs a value, e.g. `{kind}:1`"))?
                .parse::<f64>()
                .map_err(|e| format!("bad number: {e}"))
        };
        match kind {
            "zero" => Ok(FieldSpec::Zero),
            "constant" => Ok(FieldSpec::Constant(num(arg)?)),
            "mode" => Ok(FieldSpec::Mode(num(arg)?)),
            "spike" => Ok(FieldSpec::Spike(num(arg)?)),
            "random" => Ok(FieldSpec::Random(num(arg)?)),
            other => Err(format!("unknown field kind `{other}`")),
        }
    }

    pub fn build(&self, grid: Grid, seed: u64) -> anisolab::Result<Field> {
        match *self {
            FieldSpec::Zero => Ok(Field::zeros(grid)),
            FieldSpec::Constant(c) => Ok(Field::constant(grid, c)),
            FieldSpec::Mode(a) => Field::from_fn(grid, |x| {
                a * x
                    .iter()
                    .zip(grid.extents())
                    .map(|(y, e)| (std::f64::consts::PI * y / e).sin())
                    .product::<f64>()
            }),
            FieldSpec::Spike(h) => Field::spike(grid, grid.center_index(), h),
            FieldSpec::Random(s) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                Ok(anisolab::verify::random_field(grid, &mut rng).scaled(s))
            }
        }
    }

    pub fn with_scale(&self, c: f64) -> Self {
        match *self {
            FieldSpec::Zero => FieldSpec::Zero,
            FieldSpec::Constant(v) => FieldSpec::Constant(c * v),
            FieldSpec::Mode(v) => FieldSpec::Mode(c * v),
            FieldSpec::Spike(v) => FieldSpec::Spike(c * v),
            FieldSpec::Random(v) => FieldSpec::Random(c * v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub p: Vec<f64>,
    pub resolution: Vec<usize>,
    pub extents: Vec<f64>,
    pub flux: String,
    pub epsilon: f64,
    pub h: Option<FieldSpec>,
    pub t_final: f64,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iters: usize,
    pub record_every: usize,
    pub initial: FieldSpec,
    pub initial_v: FieldSpec,
    pub forcing: FieldSpec,
    pub forcing_v: Option<FieldSpec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub window: Option<(f64, f64)>,
    pub exponent_tol: f64,
    pub t0: Option<f64>,
    pub k: f64,
    pub tail_start: f64,
    pub threshold: f64,
    pub levels: Vec<f64>,
    pub tolerance: f64,
    pub scales: Vec<f64>,
    pub heights: Vec<f64>,
    pub samples: usize,
    pub rel_tol: f64,
    pub r: f64,
    pub s: f64,
    pub m: f64,
    pub solver_tol: f64,
    pub gamma: Option<f64>,
    pub checkpoint: bool,
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub parallel: usize,
    pub output: Option<PathBuf>,
    pub problem: ProblemConfig,
    pub verify: VerifyConfig,
    /// Parsed `key → value` entries, sorted by key.
    pub entries: BTreeMap<String, String>,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn err(&self, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError { line: self.map.get(key).map(|e| e.0), key: key.to_string(), message: message.into() }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|e| e.1.as_str())
    }

    fn parse<T: std::str::FromStr>(&self, key: &str, default: Option<T>) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            Some(v) => v.parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{v}`: {e}"))),
            None => default.ok_or_else(|| self.err(key, "required key missing")),
        }
    }

    fn list<T: std::str::FromStr>(&self, key: &str, default: Option<Vec<T>>) -> Result<Vec<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            Some(v) => v
                .split(',')
                .map(|x| x.trim().parse::<T>().map_err(|e| self.err(key, format!("cannot parse `{x}`: {e}"))))
                .collect(),
            None => default.ok_or_else(|| self.err(key, "required key missing")),
        }
    }

    fn field(&self, key: &str, default: FieldSpec) -> Result<FieldSpec, ConfigError> {
        match self.raw(key) {
            Some(v) => FieldSpec::parse(v).map_err(|m| self.err(key, m)),
            None => Ok(default),
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
                line: Some(i + 1),
                key: line.to_string(),
                message: "expected `key = value`".into(),
            })?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(ConfigError { line: Some(i + 1), key, message: "unknown key".into() });
            }
            if map.insert(key.clone(), (i + 1, value)).is_some() {
                return Err(ConfigError { line: Some(i + 1), key, message: "duplicate key".into() });
            }
        }
        let e = Entries { map };

        let experiment: String = e.parse("experiment", None)?;
        if !RECIPES.contains(&experiment.as_str()) {
            return Err(e.err("experiment", format!("unknown recipe `{experiment}`; expected one of {}", RECIPES.join(", "))));
        }
        let p: Vec<f64> = e.list("problem.p", None)?;
        let n_dims = p.len();
        let mut resolution: Vec<usize> = e.list("problem.resolution", Some(vec![16]))?;
        if resolution.len() == 1 {
            resolution = vec![resolution[0]; n_dims];
        }
        let extents: Vec<f64> = e.list("problem.extents", Some(vec![1.0; n_dims]))?;
        if resolution.len() != n_dims || extents.len() != n_dims {
            return Err(e.err("problem.resolution", "resolution and extents must match the number of exponents"));
        }
        let flux: String = e.parse("problem.flux", Some("orthotropic".to_string()))?;
        if !["orthotropic", "regularized", "perturbed"].contains(&flux.as_str()) {
            return Err(e.err("problem.flux", format!("unknown flux family `{flux}`")));
        }
        let h = match e.raw("problem.h") {
            Some(_) => Some(e.field("problem.h", FieldSpec::Zero)?),
            None => None,
        };
        if flux == "perturbed" && h.is_none() {
            return Err(e.err("problem.h", "the perturbed flux needs a coefficient field"));
        }
        let problem = ProblemConfig {
            p,
            resolution,
            extents,
            flux,
            epsilon: e.parse("problem.epsilon", Some(1e-3))?,
            h,
            t_final: e.parse("problem.t_final", Some(0.1))?,
            dt: e.parse("problem.dt", Some(1e-3))?,
            newton_tol: e.parse("problem.newton_tol", Some(anisolab::parabolic::DEFAULT_NEWTON_TOL))?,
            newton_max_iters: e.parse("problem.newton_max_iters", Some(anisolab::parabolic::DEFAULT_NEWTON_MAX_ITERS))?,
            record_every: e.parse("problem.record_every", Some(1))?,
            initial: e.field("problem.initial", FieldSpec::Mode(1.0))?,
            initial_v: e.field("problem.initial_v", FieldSpec::Zero)?,
            forcing: e.field("problem.forcing", FieldSpec::Zero)?,
            forcing_v: match e.raw("problem.forcing_v") {
                Some(_) => Some(e.field("problem.forcing_v", FieldSpec::Zero)?),
                None => None,
            },
        };
        let window = match e.raw("verify.window") {
            Some(_) => {
                let w: Vec<f64> = e.list("verify.window", None)?;
                if w.len() != 2 {
                    return Err(e.err("verify.window", "expected `lo,hi`"));
                }
                Some((w[0], w[1]))
            }
            None => None,
        };
        let verify = VerifyConfig {
            window,
            exponent_tol: e.parse("verify.exponent_tol", Some(anisolab::verify::DEFAULT_EXPONENT_TOL))?,
            t0: match e.raw("verify.t0") {
                Some(_) => Some(e.parse("verify.t0", None)?),
                None => None,
            },
            k: e.parse("verify.k", Some(0.0))?,
            tail_start: e.parse("verify.tail_start", Some(0.0))?,
            threshold: e.parse("verify.threshold", Some(1e-4))?,
            levels: e.list("verify.levels", Some(vec![1.0, 2.0, 4.0, 8.0, 16.0]))?,
            tolerance: e.parse("verify.tolerance", Some(1e-8))?,
            scales: e.list("verify.scales", Some(vec![1.0]))?,
            heights: e.list("verify.heights", Some(vec![1e2, 1e3, 1e4]))?,
            samples: e.parse("verify.samples", Some(10_000))?,
            rel_tol: e.parse("verify.rel_tol", Some(0.2))?,
            r: e.parse("verify.r", Some(2.0))?,
            s: e.parse("verify.s", Some(2.0))?,
            m: e.parse("verify.m", Some(f64::INFINITY))?,
            solver_tol: e.parse("verify.solver_tol", Some(1e-10))?,
            gamma: match e.raw("verify.gamma") {
                Some(_) => Some(e.parse("verify.gamma", None)?),
                None => None,
            },
            checkpoint: e.parse("verify.checkpoint", Some(false))?,
            range: e.parse("verify.range", Some(anisolab::flux::DEFAULT_SAMPLE_RANGE))?,
        };
        let parallel: usize = e.parse("parallel", Some(1))?;
        if parallel == 0 {
            return Err(e.err("parallel", "worker count must be positive"));
        }
        let config = ExperimentConfig {
            experiment,
            seed: e.parse("seed", Some(0))?,
            parallel,
            output: e.raw("output").map(PathBuf::from),
            problem,
            verify,
            entries: e.map.iter().map(|(k, (_, v))| (k.clone(), v.clone())).collect(),
        };
        // surface invalid exponents and grids at parse time
        config.exponents().map_err(|err| e.err("problem.p", err.to_string()))?;
        config.grid().map_err(|err| e.err("problem.resolution", err.to_string()))?;
        Ok(config)
    }

    /// SHA-256 of the canonical `key = value` listing.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.entries {
            h.update(format!("{k} = {v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn exponents(&self) -> anisolab::Result<ExponentVector> {
        ExponentVector::new(self.problem.p.clone())
    }

    pub fn grid(&self) -> anisolab::Result<Grid> {
        Grid::new(&self.problem.extents, &self.problem.resolution)
    }

    pub fn flux_model(&self) -> anisolab::Result<FluxModel> {
        let ev = self.exponents()?;
        match self.problem.flux.as_str() {
            "regularized" => FluxModel::regularized(ev, self.problem.epsilon),
            "perturbed" => {
                let h = self.problem.h.as_ref().expect("validated at parse time").build(self.grid()?, self.seed ^ 0x5eed)?;
                FluxModel::perturbed(ev, h)
            }
            _ => Ok(FluxModel::orthotropic(ev)),
        }
    }

    /// Problem with the given data; the remaining fields come from the config.
    pub fn problem_with(&self, initial: &FieldSpec, forcing: &FieldSpec, seed_offset: u64) -> anisolab::Result<ProblemSpec> {
        let grid = self.grid()?;
        let u0 = initial.build(grid, self.seed.wrapping_add(seed_offset))?;
        let f = forcing.build(grid, self.seed.wrapping_add(seed_offset).wrapping_add(1000))?;
        ProblemSpec::new(self.flux_model()?, u0, Forcing::Static(f), self.problem.t_final, self.problem.dt)?
            .with_newton(self.problem.newton_tol, self.problem.newton_max_iters)?
            .with_record_every(self.problem.record_every)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config_with_defaults() {
        let c = ExperimentConfig::parse("experiment = exponents\n# comment\nproblem.p = 2, 2, 2.5 # trailing\n").unwrap();
        assert_eq!(c.experiment, "exponents");
        assert_eq!(c.problem.p, vec![2.0, 2.0, 2.5]);
        assert_eq!(c.problem.resolution, vec![16, 16, 16]);
        assert_eq!(c.verify.levels.len(), 5);
    }

    #[test]
    fn unknown_recipe_names_the_key() {
        let err = ExperimentConfig::parse("experiment = frobnicate\nproblem.p = 2,2\n").unwrap_err();
        assert_eq!(err.key, "experiment");
        assert_eq!(err.line, Some(1));
        assert!(err.to_string().contains("frobnicate"));
    }

    #[test]
    fn malformed_lines_and_keys_rejected() {
        let err = ExperimentConfig::parse("experiment = decay\nproblem.p 2,2\n").unwrap_err();
        assert_eq!(err.line, Some(2));
        let err = ExperimentConfig::parse("experiment = decay\nproblem.q = 2\n").unwrap_err();
        assert_eq!(err.key, "problem.q");
        let err = ExperimentConfig::parse("experiment = decay\nproblem.p = 2,2\nproblem.initial = blob:3\n").unwrap_err();
        assert_eq!(err.key, "problem.initial");
        let err = ExperimentConfig::parse("experiment = decay\nproblem.p = 0.5,2\n").unwrap_err();
        assert_eq!(err.key, "problem.p");
        let err = ExperimentConfig::parse("experiment = decay\n").unwrap_err();
        assert_eq!(err.key, "problem.p");
    }

    #[test]
    fn hash_ignores_comments_and_order() {
        let a = ExperimentConfig::parse("experiment = decay\nproblem.p = 2,2\nseed = 3\n").unwrap();
        let b = ExperimentConfig::parse("# header\nseed = 3\nproblem.p = 2,2\nexperiment = decay\n").unwrap();
        let c = ExperimentConfig::parse("seed = 4\nproblem.p = 2,2\nexperiment = decay\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
