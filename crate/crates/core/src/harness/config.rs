//! Experiment configuration: a flat `key = value` file with
//! `[experiment]` / `[task]` / `[algorithm]` sections, plus validation
//! that reports every offending key at once.

use crate::error::{MdsError, Result};
use crate::tasks::{TaskKind, TaskSpec};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Gmds,
    Gamds,
    Pi2,
    Mds,
    Amds,
}

impl Algorithm {
    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "GMDS" | "G-MDS" => Some(Self::Gmds),
            "GAMDS" | "G-AMDS" => Some(Self::Gamds),
            "PI2" => Some(Self::Pi2),
            "MDS" => Some(Self::Mds),
            "AMDS" => Some(Self::Amds),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Gmds => "G-MDS",
            Self::Gamds => "G-AMDS",
            Self::Pi2 => "PI2",
            Self::Mds => "MDS",
            Self::Amds => "AMDS",
        }
    }

    /// File-name friendly identifier.
    pub fn slug(&self) -> &'static str {
        match self {
            Self::Gmds => "gmds",
            Self::Gamds => "gamds",
            Self::Pi2 => "pi2",
            Self::Mds => "mds",
            Self::Amds => "amds",
        }
    }
}

/// Step sizes, temperatures and schedule constants shared by the
/// algorithms; every field can be overridden from the config file.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmParams {
    pub eta: f64,
    pub r: f64,
    pub gamma: f64,
    pub step: f64,
    pub epsilon: f64,
    pub lambda_temp: f64,
    pub sigma_scale: f64,
}

impl Default for AlgorithmParams {
    fn default() -> Self {
        Self {
            eta: 10.0,
            r: 3.0,
            gamma: 1.0,
            step: 0.1,
            epsilon: 1.0,
            lambda_temp: 1.0,
            sigma_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub algorithm: Algorithm,
    pub updates: usize,
    pub rollouts: usize,
    pub seeds: Vec<u64>,
    pub output: Option<PathBuf>,
    pub params: AlgorithmParams,
}

impl ExperimentConfig {
    /// Paper-scale defaults for a task id (`point`, `arm10`, `arm50`).
    pub fn defaults_for(task_id: &str, algorithm: Algorithm) -> Result<Self> {
        let (task, updates, seeds) = match task_id {
            "point" => (TaskSpec::point2d(20), 100, (0..10).collect()),
            "arm10" => (TaskSpec::arm(10, 100), 300, (0..5).collect()),
            "arm50" => (TaskSpec::arm(50, 100), 300, (0..3).collect()),
            other => {
                return Err(MdsError::Config {
                    issues: vec![format!(
                        "task.name: unknown task `{other}` (expected point, arm10 or arm50)"
                    )],
                })
            }
        };
        Ok(Self {
            task,
            algorithm,
            updates,
            rollouts: 10,
            seeds,
            output: None,
            params: AlgorithmParams::default(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let mut issues = Vec::new();
        if self.updates == 0 {
            issues.push("experiment.updates: must be >= 1".to_string());
        }
        if self.rollouts < 2 {
            issues.push("experiment.rollouts: episodic algorithms need >= 2".to_string());
        }
        if self.seeds.is_empty() {
            issues.push("experiment.seeds: at least one seed required".to_string());
        }
        if matches!(self.algorithm, Algorithm::Mds | Algorithm::Amds) {
            issues.push(format!(
                "algorithm.name: {} operates on finite candidate sets and has no \
                 continuous via-point form; use G-MDS, G-AMDS or PI2 for this task",
                self.algorithm.name()
            ));
        }
        let p = &self.params;
        for (key, value, ok) in [
            ("algorithm.eta", p.eta, p.eta > 0.0),
            ("algorithm.r", p.r, p.r >= 3.0),
            ("algorithm.gamma", p.gamma, p.gamma > 0.0),
            ("algorithm.step", p.step, p.step > 0.0),
            ("algorithm.epsilon", p.epsilon, p.epsilon > 0.0),
            ("algorithm.lambda_temp", p.lambda_temp, p.lambda_temp > 0.0),
            ("algorithm.sigma_scale", p.sigma_scale, p.sigma_scale > 0.0),
        ] {
            if !(value.is_finite() && ok) {
                issues.push(format!("{key}: {value} out of range"));
            }
        }
        if self.task.n_basis == 0 {
            issues.push("task.n_basis: must be >= 1".to_string());
        }
        if let TaskKind::ArmViaPoint { dof } = self.task.kind {
            if dof == 0 {
                issues.push("task.dof: must be >= 1".to_string());
            }
        }
        if issues.is_empty() {
            Ok(())
        } else {
            Err(MdsError::Config { issues })
        }
    }

    /// The resolved configuration as deterministic `key = value` lines,
    /// written into the run metadata file.
    pub fn describe(&self) -> String {
        let task_name = match self.task.kind {
            TaskKind::Point2D => "point".to_string(),
            TaskKind::ArmViaPoint { dof } => format!("arm{dof}"),
        };
        let seeds: Vec<String> = self.seeds.iter().map(|s| s.to_string()).collect();
        let mut out = String::new();
        out.push_str("[experiment]\n");
        out.push_str(&format!("updates = {}\n", self.updates));
        out.push_str(&format!("rollouts = {}\n", self.rollouts));
        out.push_str(&format!("seeds = {}\n", seeds.join(",")));
        out.push_str("cost_metric = batch_mean_rollout_cost\n");
        out.push_str("\n[task]\n");
        out.push_str(&format!("name = {task_name}\n"));
        out.push_str(&format!("n_basis = {}\n", self.task.n_basis));
        out.push_str(&format!("dt = {}\n", self.task.dt));
        out.push_str(&format!("duration = {}\n", self.task.duration));
        out.push_str(&format!("via_time = {}\n", self.task.via_time));
        out.push_str(&format!(
            "via_point = {},{}\n",
            self.task.via_point.0, self.task.via_point.1
        ));
        out.push_str("\n[algorithm]\n");
        out.push_str(&format!("name = {}\n", self.algorithm.name()));
        out.push_str(&format!("eta = {}\n", self.params.eta));
        out.push_str(&format!("r = {}\n", self.params.r));
        out.push_str(&format!("gamma = {}\n", self.params.gamma));
        out.push_str(&format!("step = {}\n", self.params.step));
        out.push_str(&format!("epsilon = {}\n", self.params.epsilon));
        out.push_str(&format!("lambda_temp = {}\n", self.params.lambda_temp));
        out.push_str(&format!("sigma_scale = {}\n", self.params.sigma_scale));
        out
    }
}

/// Raw parsed file: section -> key -> value.
struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        let mut issues = Vec::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if line.ends_with(']') {
                    current = line[1..line.len() - 1].trim().to_string();
                    sections.entry(current.clone()).or_default();
                } else {
                    issues.push(format!("line {}: malformed section header", lineno + 1));
                }
                continue;
            }
            match line.split_once('=') {
                Some((key, value)) => {
                    if current.is_empty() {
                        issues.push(format!("line {}: key before any section", lineno + 1));
                    } else {
                        sections
                            .entry(current.clone())
                            .or_default()
                            .insert(key.trim().to_string(), value.trim().to_string());
                    }
                }
                None => issues.push(format!("line {}: expected `key = value`", lineno + 1)),
            }
        }
        if issues.is_empty() {
            Ok(Self { sections })
        } else {
            Err(MdsError::Config { issues })
        }
    }

    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.sections.get_mut(section).and_then(|s| s.remove(key))
    }

    fn leftover_keys(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (section, keys) in &self.sections {
            for key in keys.keys() {
                out.push(format!("{section}.{key}: unknown key"));
            }
        }
        out
    }
}

fn parse_number<T: std::str::FromStr>(
    raw: Option<String>,
    key: &str,
    default: T,
    issues: &mut Vec<String>,
) -> T {
    match raw {
        None => default,
        Some(text) => text.parse().unwrap_or_else(|_| {
            issues.push(format!("{key}: `{text}` is not a valid number"));
            default
        }),
    }
}

pub fn parse_seed_list(text: &str) -> std::result::Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in text.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.parse() {
            Ok(s) => seeds.push(s),
            Err(_) => return Err(format!("`{part}` is not a valid seed")),
        }
    }
    if seeds.is_empty() {
        return Err("empty seed list".to_string());
    }
    Ok(seeds)
}

/// Loads a config file. Unknown keys, malformed values and out-of-range
/// settings are all collected into a single validation error.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| MdsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut raw = RawConfig::parse(text)?;
    let mut issues = Vec::new();

    let task_name = raw
        .take("task", "name")
        .unwrap_or_else(|| "point".to_string());
    let dof = parse_number(raw.take("task", "dof"), "task.dof", 10usize, &mut issues);
    let mut task = match task_name.as_str() {
        "point" => TaskSpec::point2d(20),
        "arm" => TaskSpec::arm(dof, 100),
        "arm10" => TaskSpec::arm(10, 100),
        "arm50" => TaskSpec::arm(50, 100),
        other => {
            issues.push(format!("task.name: unknown task `{other}`"));
            TaskSpec::point2d(20)
        }
    };
    task.n_basis = parse_number(
        raw.take("task", "n_basis"),
        "task.n_basis",
        task.n_basis,
        &mut issues,
    );

    let algorithm = match raw.take("algorithm", "name") {
        None => Algorithm::Gamds,
        Some(name) => Algorithm::parse(&name).unwrap_or_else(|| {
            issues.push(format!("algorithm.name: unknown algorithm `{name}`"));
            Algorithm::Gamds
        }),
    };

    let updates = parse_number(
        raw.take("experiment", "updates"),
        "experiment.updates",
        100usize,
        &mut issues,
    );
    let rollouts = parse_number(
        raw.take("experiment", "rollouts"),
        "experiment.rollouts",
        10usize,
        &mut issues,
    );
    let seeds = match raw.take("experiment", "seeds") {
        None => (0..10).collect(),
        Some(text) => parse_seed_list(&text).unwrap_or_else(|e| {
            issues.push(format!("experiment.seeds: {e}"));
            vec![0]
        }),
    };
    let output = raw.take("experiment", "output").map(PathBuf::from);

    let defaults = AlgorithmParams::default();
    let params = AlgorithmParams {
        eta: parse_number(
            raw.take("algorithm", "eta"),
            "algorithm.eta",
            defaults.eta,
            &mut issues,
        ),
        r: parse_number(
            raw.take("algorithm", "r"),
            "algorithm.r",
            defaults.r,
            &mut issues,
        ),
        gamma: parse_number(
            raw.take("algorithm", "gamma"),
            "algorithm.gamma",
            defaults.gamma,
            &mut issues,
        ),
        step: parse_number(
            raw.take("algorithm", "step"),
            "algorithm.step",
            defaults.step,
            &mut issues,
        ),
        epsilon: parse_number(
            raw.take("algorithm", "epsilon"),
            "algorithm.epsilon",
            defaults.epsilon,
            &mut issues,
        ),
        lambda_temp: parse_number(
            raw.take("algorithm", "lambda_temp"),
            "algorithm.lambda_temp",
            defaults.lambda_temp,
            &mut issues,
        ),
        sigma_scale: parse_number(
            raw.take("algorithm", "sigma_scale"),
            "algorithm.sigma_scale",
            defaults.sigma_scale,
            &mut issues,
        ),
    };

    issues.extend(raw.leftover_keys());
    let cfg = ExperimentConfig {
        task,
        algorithm,
        updates,
        rollouts,
        seeds,
        output,
        params,
    };
    if let Err(MdsError::Config { issues: range_issues }) = cfg.validate() {
        issues.extend(range_issues);
    }
    if !issues.is_empty() {
        return Err(MdsError::Config { issues });
    }
    Ok(cfg)
}
