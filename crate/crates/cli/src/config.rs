//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write;

use sl_duality::analytics::Coupling;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("unknown key(s): {}", .0.join(", "))]
    Unknown(Vec<String>),
    #[error("missing key `{0}`")]
    Missing(String),
    #[error("key `{key}`: cannot use `{value}`: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("{0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Merton,
    CuocoLiu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CuocoLiuKeys {
    pub big_r: f64,
    pub iota: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolarPolicy {
    /// Constant controls `a` and `γ` at every step.
    Constant { a: f64, gamma: f64 },
    /// Independent uniform draws from `A` and `Γ` per step, from `seed`.
    Random,
}

/// A fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub p: f64,
    pub r: f64,
    pub b: f64,
    pub sigma: f64,
    pub horizon: f64,
    pub x_max: f64,
    pub cuoco_liu: Option<CuocoLiuKeys>,
    pub rho: f64,
    pub c0: f64,
    pub order: usize,
    pub k_min: u32,
    pub k_max: u32,
    pub base_steps: usize,
    pub coupling: Coupling,
    /// `None` means `auto`.
    pub y_max: Option<f64>,
    pub seed: u64,
    pub record_cpu_time: bool,
    pub polar_x: f64,
    pub polar_y: f64,
    pub polar_steps: Vec<usize>,
    pub polar_policy: PolarPolicy,
    resolved: BTreeMap<String, String>,
}

const MODEL_KEYS: [&str; 7] = ["problem", "p", "r", "b", "sigma", "T", "x_max"];
const CUOCO_LIU_KEYS: [&str; 4] = ["R", "iota", "lambda_plus", "lambda_minus"];
const OPTIONAL_KEYS: [(&str, &str); 16] = [
    ("rho", "18"),
    ("c0", "8"),
    ("M", "4"),
    ("k_min", "1"),
    ("k_max", "5"),
    ("base_N", "4"),
    ("coupling", "11/8"),
    ("y_max", "auto"),
    ("seed", "0"),
    ("record_cpu_time", "false"),
    ("polar_x", "1"),
    ("polar_y", "1"),
    ("polar_steps", "2,4,8"),
    ("polar_policy", "constant"),
    ("polar_a", "0"),
    ("polar_gamma", "0"),
];

fn value_error(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.into(),
    }
}

struct Table {
    map: BTreeMap<String, String>,
}

impl Table {
    fn raw(&self, key: &str) -> Result<&str, ConfigError> {
        self.map
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| ConfigError::Missing(key.to_string()))
    }

    fn real(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.raw(key)?;
        let x: f64 = v.parse().map_err(|_| value_error(key, v, "not a number"))?;
        if !x.is_finite() {
            return Err(value_error(key, v, "not finite"));
        }
        Ok(x)
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.real(key)?;
        if x <= 0.0 {
            return Err(value_error(key, self.raw(key)?, "must be positive"));
        }
        Ok(x)
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        let v = self.raw(key)?;
        v.parse()
            .map_err(|_| value_error(key, v, "not a nonnegative integer"))
    }

    fn boolean(&self, key: &str) -> Result<bool, ConfigError> {
        match self.raw(key)? {
            "true" => Ok(true),
            "false" => Ok(false),
            v => Err(value_error(key, v, "expected true or false")),
        }
    }
}

fn parse_lines(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(ConfigError::Syntax {
                line: i + 1,
                text: line.to_string(),
            });
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(ConfigError::Duplicate {
                line: i + 1,
                key: key.to_string(),
            });
        }
    }
    Ok(map)
}

fn parse_coupling(v: &str) -> Result<Coupling, ConfigError> {
    let bad = |reason: &str| value_error("coupling", v, reason);
    let (num, den) = match v.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (v, "1"),
    };
    let num: u32 = num.parse().map_err(|_| bad("expected a ratio like 11/8"))?;
    let den: u32 = den.parse().map_err(|_| bad("expected a ratio like 11/8"))?;
    Coupling::new(num, den).map_err(|e| bad(&e.to_string()))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = parse_lines(text)?;
        let problem = match map.get("problem").map(String::as_str) {
            Some("merton") => ProblemKind::Merton,
            Some("cuoco-liu") => ProblemKind::CuocoLiu,
            Some(other) => {
                return Err(value_error(
                    "problem",
                    other,
                    "expected merton or cuoco-liu (custom models need the library API)",
                ))
            }
            None => return Err(ConfigError::Missing("problem".into())),
        };
        let mut known: Vec<&str> = MODEL_KEYS.to_vec();
        if problem == ProblemKind::CuocoLiu {
            known.extend(CUOCO_LIU_KEYS);
        }
        known.extend(OPTIONAL_KEYS.iter().map(|(k, _)| *k));
        let unknown: Vec<String> = map
            .keys()
            .filter(|k| !known.contains(&k.as_str()))
            .cloned()
            .collect();
        if !unknown.is_empty() {
            return Err(ConfigError::Unknown(unknown));
        }
        for key in known.iter().take(MODEL_KEYS.len()) {
            if !map.contains_key(*key) {
                return Err(ConfigError::Missing(key.to_string()));
            }
        }
        if problem == ProblemKind::CuocoLiu {
            for key in CUOCO_LIU_KEYS {
                if !map.contains_key(key) {
                    return Err(ConfigError::Missing(key.to_string()));
                }
            }
        }
        for (key, default) in OPTIONAL_KEYS {
            map.entry(key.to_string())
                .or_insert_with(|| default.to_string());
        }
        let t = Table { map };

        let cuoco_liu = match problem {
            ProblemKind::CuocoLiu => Some(CuocoLiuKeys {
                big_r: t.real("R")?,
                iota: t.real("iota")?,
                lambda_plus: t.real("lambda_plus")?,
                lambda_minus: t.real("lambda_minus")?,
            }),
            ProblemKind::Merton => None,
        };
        let y_max = match t.raw("y_max")? {
            "auto" => None,
            _ => Some(t.positive("y_max")?),
        };
        let polar_steps = t
            .raw("polar_steps")?
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .ok()
                    .filter(|&n| n > 0)
                    .ok_or_else(|| value_error("polar_steps", s, "expected positive integers"))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let polar_policy = match t.raw("polar_policy")? {
            "constant" => PolarPolicy::Constant {
                a: t.real("polar_a")?,
                gamma: t.real("polar_gamma")?,
            },
            "random" => PolarPolicy::Random,
            v => {
                return Err(value_error(
                    "polar_policy",
                    v,
                    "expected constant or random",
                ))
            }
        };
        let cfg = ExperimentConfig {
            problem,
            p: t.real("p")?,
            r: t.real("r")?,
            b: t.real("b")?,
            sigma: t.positive("sigma")?,
            horizon: t.positive("T")?,
            x_max: t.positive("x_max")?,
            cuoco_liu,
            rho: t.positive("rho")?,
            c0: t.positive("c0")?,
            order: t.integer("M")?,
            k_min: t.integer("k_min")?,
            k_max: t.integer("k_max")?,
            base_steps: t.integer("base_N")?,
            coupling: parse_coupling(t.raw("coupling")?)?,
            y_max,
            seed: t.integer("seed")?,
            record_cpu_time: t.boolean("record_cpu_time")?,
            polar_x: t.real("polar_x")?,
            polar_y: t.real("polar_y")?,
            polar_steps,
            polar_policy,
            resolved: t.map,
        };
        if cfg.k_min > cfg.k_max {
            return Err(ConfigError::Inconsistent(format!(
                "k_min = {} exceeds k_max = {}",
                cfg.k_min, cfg.k_max
            )));
        }
        if cfg.base_steps == 0 {
            return Err(ConfigError::Inconsistent("base_N must be positive".into()));
        }
        if !(2..=sl_duality::quadrature::MAX_ORDER).contains(&cfg.order) {
            return Err(ConfigError::Inconsistent(format!(
                "M = {} outside 2..={}",
                cfg.order,
                sl_duality::quadrature::MAX_ORDER
            )));
        }
        if cfg.x_max <= cfg.rho {
            return Err(ConfigError::Inconsistent(format!(
                "x_max = {} must exceed rho = {} for the right boundary value",
                cfg.x_max, cfg.rho
            )));
        }
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Every key with its resolved value, one `key = value` per line, sorted.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.resolved {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}
