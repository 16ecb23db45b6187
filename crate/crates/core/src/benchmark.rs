//! One simulation replicate end to end: generate, sample, solve the path,
//! select by BIC, and score against the truth.

use crate::covariance::build_pair;
use crate::error::Result;
use crate::evaluation::{curve_from_path, naive_baseline, naive_curve, support_metrics, Curve, CurvePoint, MetricsReport};
use crate::model_selection::{lambda_grid, select_index, solve_path, BicNorm};
use crate::simulation::{GroundTruth, SimulationSpec};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkConfig {
    pub solver: SolverConfig,
    pub grid_count: usize,
    pub grid_ratio: f64,
    pub ridge: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            solver: SolverConfig::default(),
            grid_count: crate::model_selection::DEFAULT_GRID_COUNT,
            grid_ratio: crate::model_selection::DEFAULT_GRID_RATIO,
            ridge: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub lambda: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug, Clone)]
pub struct ReplicateResult {
    pub seed: u64,
    pub frobenius: Selection,
    pub max_abs: Selection,
    pub curve: Curve,
    pub naive: Curve,
    pub converged: bool,
}

impl ReplicateResult {
    pub fn selection(&self, norm: BicNorm) -> &Selection {
        match norm {
            BicNorm::Frobenius => &self.frobenius,
            BicNorm::MaxAbs => &self.max_abs,
        }
    }
}

pub fn run_replicate(spec: &SimulationSpec, cfg: &BenchmarkConfig) -> Result<ReplicateResult> {
    let truth = spec.ground_truth()?;
    run_replicate_with_truth(spec, &truth, cfg)
}

pub fn run_replicate_with_truth(
    spec: &SimulationSpec,
    truth: &GroundTruth,
    cfg: &BenchmarkConfig,
) -> Result<ReplicateResult> {
    let (x, y) = spec.sample(truth)?;
    let pair = build_pair(&x, &y)?;
    let grid = lambda_grid(&pair, cfg.grid_count, cfg.grid_ratio)?;
    let path = solve_path(&pair, &grid, &cfg.solver)?;
    let truth_m = truth.delta_star.as_matrix();

    let select = |norm| -> Result<Selection> {
        let i = select_index(&path, norm)?;
        Ok(Selection {
            lambda: path.lambdas[i],
            metrics: support_metrics(&path.estimates[i].delta, truth_m)?,
        })
    };
    let baseline = naive_baseline(&pair, cfg.ridge)?;
    Ok(ReplicateResult {
        seed: spec.seed,
        frobenius: select(BicNorm::Frobenius)?,
        max_abs: select(BicNorm::MaxAbs)?,
        curve: curve_from_path(&path, truth_m)?,
        naive: naive_curve(&baseline, truth_m, cfg.grid_count, cfg.grid_ratio)?,
        converged: path.all_converged(),
    })
}

/// Pointwise mean of curves at matching indices (curves may differ in length;
/// each index averages the curves that reach it).
pub fn average_curves<'a>(curves: impl IntoIterator<Item = &'a Curve>) -> Vec<CurvePoint> {
    let mut sums: Vec<(CurvePoint, usize)> = Vec::new();
    for c in curves {
        for (k, pt) in c.points.iter().enumerate() {
            if k == sums.len() {
                sums.push((
                    CurvePoint {
                        lambda: 0.0,
                        tp_rate: 0.0,
                        fp_rate: 0.0,
                        precision: 0.0,
                    },
                    0,
                ));
            }
            let (acc, n) = &mut sums[k];
            acc.lambda += pt.lambda;
            acc.tp_rate += pt.tp_rate;
            acc.fp_rate += pt.fp_rate;
            acc.precision += pt.precision;
            *n += 1;
        }
    }
    sums.into_iter()
        .map(|(acc, n)| {
            let n = n as f64;
            CurvePoint {
                lambda: acc.lambda / n,
                tp_rate: acc.tp_rate / n,
                fp_rate: acc.fp_rate / n,
                precision: acc.precision / n,
            }
        })
        .collect()
}

/// Sample mean and standard deviation (`n − 1` divisor; `None` for a single value).
pub fn mean_sd(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::Scenario;

    #[test]
    fn mean_sd_cases() {
        assert_eq!(mean_sd(&[2.0]), (2.0, None));
        let (m, s) = mean_sd(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn average_of_ragged_curves() {
        let pt = |v: f64| CurvePoint {
            lambda: v,
            tp_rate: v,
            fp_rate: v,
            precision: v,
        };
        let a = Curve { points: vec![pt(0.2), pt(0.4)], auc: 0.0 };
        let b = Curve { points: vec![pt(0.4)], auc: 0.0 };
        let avg = average_curves([&a, &b]);
        assert_eq!(avg.len(), 2);
        assert!((avg[0].tp_rate - 0.3).abs() < 1e-15);
        assert_eq!(avg[1].tp_rate, 0.4);
    }

    #[test]
    fn small_replicate_runs() {
        let spec = SimulationSpec {
            scenario: Scenario::Sim1,
            p: 12,
            n_x: 200,
            n_y: 200,
            seed: 3,
        };
        let cfg = BenchmarkConfig {
            grid_count: 8,
            ..BenchmarkConfig::default()
        };
        let r = run_replicate(&spec, &cfg).unwrap();
        assert_eq!(r.curve.points.len(), 8);
        assert!((0.0..=1.0).contains(&r.curve.auc));
        let again = run_replicate(&spec, &cfg).unwrap();
        assert_eq!(r.curve, again.curve);
    }
}
