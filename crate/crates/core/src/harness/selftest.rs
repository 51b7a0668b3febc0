//! Quick self-contained property checks runnable from the CLI. Each check
//! re-derives its expected values through an independent numerical route
//! (a plain projected-gradient minimizer, exhaustive path enumeration),
//! never through the kernels under test.

use crate::dp::{dp_exponentiated_update, FiniteChain};
use crate::error::Result;
use crate::harness::{render_csv, run_experiment, Algorithm, AlgorithmParams, ExperimentConfig};
use crate::mirror::{md_step_kl, prox_perturbed_kl};
use crate::pi2::softmin_weights;
use crate::rng::substream;
use crate::simplex::{project_to_simplex, CostVector, SimplexWeights};
use crate::tasks::TaskSpec;
use rand::Rng;

pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Fixed-step projected gradient with analytic gradients supplied by the
/// caller; deliberately naive, used only as a reference solver.
fn reference_minimize(
    m: usize,
    gradient: impl Fn(&[f64]) -> Vec<f64>,
    iterations: usize,
    step: f64,
) -> Vec<f64> {
    let mut q = vec![1.0 / m as f64; m];
    for it in 0..iterations {
        let g = gradient(&q);
        let s = step / (1.0 + (it as f64).sqrt() * 0.01);
        let moved: Vec<f64> = q.iter().zip(&g).map(|(&a, &b)| a - s * b).collect();
        q = project_to_simplex(&moved);
        for v in &mut q {
            *v = v.max(1e-15);
        }
        let total: f64 = q.iter().sum();
        for v in &mut q {
            *v /= total;
        }
    }
    q
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn check_exponentiated_gradient() -> CheckOutcome {
    let mut rng = substream(1001, &[0]);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(2..8usize);
        let anchor_raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let anchor = SimplexWeights::normalized(anchor_raw).unwrap();
        let j: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
        let eta = rng.random_range(0.5..2.0);
        let got = md_step_kl(&anchor, &CostVector::new(j.clone()).unwrap(), eta).unwrap();
        let a = anchor.as_slice().to_vec();
        let jj = j.clone();
        let reference = reference_minimize(
            m,
            move |q| {
                q.iter()
                    .zip(jj.iter().zip(&a))
                    .map(|(&qv, (&cv, &av))| cv + eta * (qv.max(1e-15) / av).ln())
                    .collect()
            },
            30_000,
            0.05,
        );
        worst = worst.max(max_abs_diff(got.as_slice(), &reference));
    }
    CheckOutcome {
        name: "exponentiated gradient vs reference minimizer",
        passed: worst < 1e-5,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn check_perturbed_prox() -> CheckOutcome {
    let mut rng = substream(1002, &[0]);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(2..8usize);
        let anchor_raw: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
        let anchor = SimplexWeights::normalized(anchor_raw).unwrap();
        let j: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..2.0)).collect();
        let step = rng.random_range(0.2..1.5);
        let eps = rng.random_range(0.3..1.5);
        let got =
            prox_perturbed_kl(&anchor, &CostVector::new(j.clone()).unwrap(), step, eps).unwrap();
        let a = anchor.as_slice().to_vec();
        let jj = j.clone();
        let reference = reference_minimize(
            m,
            move |q| {
                q.iter()
                    .zip(jj.iter().zip(&a))
                    .map(|(&qv, (&cv, &av))| {
                        step * cv + eps * ((qv + eps) / (av + eps)).ln()
                    })
                    .collect()
            },
            30_000,
            0.05,
        );
        worst = worst.max(max_abs_diff(got.as_slice(), &reference));
    }
    CheckOutcome {
        name: "perturbed-KL prox vs reference minimizer",
        passed: worst < 1e-5,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn check_chain_update() -> CheckOutcome {
    let mut rng = substream(1003, &[0]);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let states = 3usize;
        let horizon = 3usize;
        let row = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            let raw: Vec<f64> = (0..states).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / total).collect()
        };
        let chain = FiniteChain::new(
            row(&mut rng),
            (0..horizon - 1)
                .map(|_| (0..states).map(|_| row(&mut rng)).collect())
                .collect(),
        )
        .unwrap();
        let costs: Vec<f64> = (0..states).map(|_| rng.random_range(0.0..3.0)).collect();
        let eta = rng.random_range(0.5..2.0);
        let updated = dp_exponentiated_update(&chain, &costs, eta).unwrap();

        // Exhaustive path-space reweighting for comparison.
        let mut paths = vec![vec![]];
        for _ in 0..horizon {
            paths = paths
                .iter()
                .flat_map(|p: &Vec<usize>| {
                    (0..states).map(move |s| {
                        let mut q = p.clone();
                        q.push(s);
                        q
                    })
                })
                .collect();
        }
        let mut flat: Vec<f64> = paths
            .iter()
            .map(|p| {
                let c: f64 = p.iter().map(|&s| costs[s]).sum();
                chain.path_probability(p) * (-c / eta).exp()
            })
            .collect();
        let z: f64 = flat.iter().sum();
        for v in &mut flat {
            *v /= z;
        }
        for (p, &expected) in paths.iter().zip(&flat) {
            worst = worst.max((updated.path_probability(p) - expected).abs());
        }
    }
    CheckOutcome {
        name: "chain update vs exhaustive path enumeration",
        passed: worst < 1e-8,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn check_softmin_correspondence() -> CheckOutcome {
    let mut rng = substream(1004, &[0]);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let m = rng.random_range(2..10usize);
        let costs: Vec<f64> = (0..m).map(|_| rng.random_range(-4.0..4.0)).collect();
        let lam = rng.random_range(0.3..3.0);
        let a = softmin_weights(&costs, lam).unwrap();
        let b = md_step_kl(
            &SimplexWeights::uniform(m).unwrap(),
            &CostVector::new(costs).unwrap(),
            lam,
        )
        .unwrap();
        worst = worst.max(max_abs_diff(a.as_slice(), b.as_slice()));
    }
    CheckOutcome {
        name: "softmin weights match uniform-prior exponentiated gradient",
        passed: worst < 1e-12,
        detail: format!("max deviation {worst:.2e}"),
    }
}

fn check_determinism() -> CheckOutcome {
    let cfg = ExperimentConfig {
        task: TaskSpec::point2d(6),
        algorithm: Algorithm::Gamds,
        updates: 3,
        rollouts: 4,
        seeds: vec![0, 1],
        output: None,
        params: AlgorithmParams::default(),
    };
    let run = || -> Result<String> { Ok(render_csv(&run_experiment(&cfg)?)) };
    match (run(), run()) {
        (Ok(a), Ok(b)) => CheckOutcome {
            name: "repeated run is byte-identical",
            passed: a == b,
            detail: if a == b {
                "identical".to_string()
            } else {
                "outputs differ".to_string()
            },
        },
        (Err(e), _) | (_, Err(e)) => CheckOutcome {
            name: "repeated run is byte-identical",
            passed: false,
            detail: format!("run failed: {e}"),
        },
    }
}

/// Runs all checks; each returns its name, verdict and a short detail line.
pub fn run_selftest() -> Vec<CheckOutcome> {
    vec![
        check_exponentiated_gradient(),
        check_perturbed_prox(),
        check_chain_update(),
        check_softmin_correspondence(),
        check_determinism(),
    ]
}
