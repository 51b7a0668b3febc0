//! Experiment runner: seeding, algorithm dispatch, learning-curve
//! aggregation and file output.

pub mod config;
pub mod output;
pub mod selftest;

pub use config::{
    load_config, parse_config, parse_seed_list, Algorithm, AlgorithmParams, ExperimentConfig,
};
pub use output::{emit_csv, emit_svg_plot, render_csv, render_svg, LearningCurve};

use crate::error::Result;
use crate::gaussian::{AmdGaussianState, Covariance, GaussianSearchState};
use crate::mirror::AmdSchedule;
use crate::pi2::{pi2_run, ExplorationMode, Pi2Config};
use crate::search::{gamds_run, gmds_run};
use crate::tasks::{TaskKind, ViaPointTask};
use nalgebra::DMatrix;
use std::path::Path;

fn task_slug(kind: TaskKind) -> String {
    match kind {
        TaskKind::Point2D => "point".to_string(),
        TaskKind::ArmViaPoint { dof } => format!("arm{dof}"),
    }
}

/// Runs one seed of the configured algorithm, returning the batch-mean
/// rollout cost per update.
fn run_seed(cfg: &ExperimentConfig, task: &ViaPointTask, seed: u64) -> Result<Vec<f64>> {
    let p = &cfg.params;
    match cfg.algorithm {
        Algorithm::Gmds => {
            let init = GaussianSearchState::isotropic(task.initial_theta_flat(), p.sigma_scale)?;
            let (_, trace) = gmds_run(task, &init, p.eta, cfg.rollouts, cfg.updates, seed)?;
            Ok(trace.into_iter().map(|t| t.batch_mean_cost).collect())
        }
        Algorithm::Gamds => {
            let mean = task.initial_theta_flat();
            let z = GaussianSearchState::isotropic(mean.clone(), p.sigma_scale)?;
            let x = GaussianSearchState::isotropic(mean, p.sigma_scale)?;
            let sched = AmdSchedule::new(p.r, p.gamma, p.step, 1)?;
            let init = AmdGaussianState::new(z, x, sched, p.epsilon)?;
            let (_, trace) = gamds_run(task, &init, cfg.rollouts, cfg.updates, seed)?;
            Ok(trace.into_iter().map(|t| t.batch_mean_cost).collect())
        }
        Algorithm::Pi2 => {
            let n = task.spec().n_basis;
            let pi2_cfg = Pi2Config {
                r_matrix: DMatrix::identity(n, n),
                lambda_temp: p.lambda_temp,
                rollouts: cfg.rollouts,
                updates: cfg.updates,
                exploration: Covariance::isotropic(n, p.sigma_scale)?,
                mode: ExplorationMode::Episode,
            };
            let (curve, _) = pi2_run(task, task.initial_theta(), &pi2_cfg, seed)?;
            Ok(curve)
        }
        // validate() rejects these for via-point tasks before we get here.
        Algorithm::Mds | Algorithm::Amds => unreachable!("rejected by config validation"),
    }
}

/// Runs the experiment over all seeds. When the config names an output
/// directory, writes the aggregate CSV, one per-seed CSV, the SVG plot and
/// a metadata file with the resolved configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<LearningCurve> {
    cfg.validate()?;
    let task = cfg.task.build()?;
    let per_seed: Vec<Vec<f64>> = cfg
        .seeds
        .iter()
        .map(|&seed| run_seed(cfg, &task, seed))
        .collect::<Result<_>>()?;
    let curve = LearningCurve::from_seed_curves(per_seed)?;

    if let Some(dir) = &cfg.output {
        write_run_outputs(cfg, &curve, dir)?;
    }
    Ok(curve)
}

fn write_run_outputs(cfg: &ExperimentConfig, curve: &LearningCurve, dir: &Path) -> Result<()> {
    let prefix = format!("{}_{}", cfg.algorithm.slug(), task_slug(cfg.task.kind));
    emit_csv(curve, &dir.join(format!("{prefix}.csv")))?;
    for (idx, seed_curve) in curve.per_seed.iter().enumerate() {
        let single = LearningCurve::from_seed_curves(vec![seed_curve.clone()])?;
        emit_csv(
            &single,
            &dir.join(format!("{prefix}_seed{}.csv", cfg.seeds[idx])),
        )?;
    }
    emit_svg_plot(
        &[(cfg.algorithm.name().to_string(), curve)],
        &dir.join(format!("{prefix}.svg")),
    )?;
    output::emit_text(&dir.join(format!("{prefix}_meta.txt")), &cfg.describe())?;
    Ok(())
}

/// Final-cost summary row of a comparison run.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub algorithm: Algorithm,
    pub final_mean: f64,
    pub final_std: f64,
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub task_id: String,
    pub rows: Vec<ComparisonRow>,
    pub curves: Vec<(Algorithm, LearningCurve)>,
}

impl Comparison {
    /// Plain-text table in the shape `name  mean ± std`.
    pub fn table(&self) -> String {
        let mut out = format!("final cost, task {}\n", self.task_id);
        for row in &self.rows {
            out.push_str(&format!(
                "{:<8} {:9.3e} +- {:9.3e}\n",
                row.algorithm.name(),
                row.final_mean,
                row.final_std
            ));
        }
        out
    }

    pub fn row(&self, algorithm: Algorithm) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Runs the Gaussian searches and the baseline on one task with shared
/// seeds and emits the final-cost table, the combined plot and per-run
/// CSVs when an output directory is given.
pub fn compare_suite(task_id: &str, out_dir: Option<&Path>) -> Result<Comparison> {
    let algorithms = [Algorithm::Gamds, Algorithm::Gmds, Algorithm::Pi2];
    let mut curves = Vec::new();
    let mut rows = Vec::new();
    for algorithm in algorithms {
        let mut cfg = ExperimentConfig::defaults_for(task_id, algorithm)?;
        cfg.output = out_dir.map(|d| d.to_path_buf());
        let curve = run_experiment(&cfg)?;
        rows.push(ComparisonRow {
            algorithm,
            final_mean: curve.final_mean(),
            final_std: curve.final_std(),
        });
        curves.push((algorithm, curve));
    }
    let comparison = Comparison {
        task_id: task_id.to_string(),
        rows,
        curves,
    };
    if let Some(dir) = out_dir {
        let named: Vec<(String, &LearningCurve)> = comparison
            .curves
            .iter()
            .map(|(a, c)| (a.name().to_string(), c))
            .collect();
        emit_svg_plot(&named, &dir.join(format!("compare_{task_id}.svg")))?;
        output::emit_text(
            &dir.join(format!("compare_{task_id}.txt")),
            &comparison.table(),
        )?;
    }
    Ok(comparison)
}
