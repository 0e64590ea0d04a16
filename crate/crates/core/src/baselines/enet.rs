use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_training_input, fmt_num, mean_log_loss, parse_num, prior_log_odds, probabilities};
use crate::checkpoint::Section;
use crate::error::{Error, Result};
use crate::features::Matrix;
use crate::scalar::{sigmoid, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnetParams {
    /// L1/L2 mixing: 1 is lasso, 0 is ridge.
    pub alpha: f64,
    pub lambda: f64,
    pub max_sweeps: usize,
    /// Convergence threshold on the largest coordinate change in a sweep.
    pub tol: f64,
    pub standardize: bool,
}

impl Default for EnetParams {
    fn default() -> Self {
        Self { alpha: 0.5, lambda: 1e-3, max_sweeps: 10_000, tol: 1e-10, standardize: true }
    }
}

/// Logistic regression with an elastic-net penalty. Weights live in the
/// standardized feature space described by `means` / `scales`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnetModel<T> {
    pub weights: Vec<T>,
    pub bias: T,
    pub alpha: T,
    pub lambda: T,
    pub means: Vec<T>,
    pub scales: Vec<T>,
}

fn soft_threshold<T: Scalar>(v: T, t: T) -> T {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        T::zero()
    }
}

struct Problem<T> {
    /// Column-major standardized design.
    cols: Vec<Vec<T>>,
    y: Vec<bool>,
    alpha: T,
    lambda: T,
}

impl<T: Scalar> Problem<T> {
    fn penalty(&self, w: &[T]) -> T {
        let l1: T = w.iter().map(|v| v.abs()).sum();
        let l2: T = w.iter().map(|v| *v * *v).sum();
        self.lambda * (self.alpha * l1 + (T::one() - self.alpha) / T::lit(2.0) * l2)
    }

    fn objective(&self, eta: &[T], w: &[T]) -> T {
        mean_log_loss(eta, &self.y) + self.penalty(w)
    }
}

/// Coordinate descent on mean logistic loss + λ(α‖w‖₁ + (1−α)/2 ‖w‖²).
pub fn fit_enet<T: Scalar>(x: &Matrix<T>, y: &[bool], params: &EnetParams) -> Result<EnetModel<T>> {
    fit_enet_traced(x, y, params).map(|(m, _)| m)
}

/// As [`fit_enet`], also returning the objective after every sweep.
pub fn fit_enet_traced<T: Scalar>(x: &Matrix<T>, y: &[bool], params: &EnetParams) -> Result<(EnetModel<T>, Vec<T>)> {
    check_training_input(x, y)?;
    if !(0.0..=1.0).contains(&params.alpha) || !(params.lambda >= 0.0) {
        return Err(Error::Config("enet alpha must be in [0,1] and lambda >= 0".into()));
    }
    let n = x.rows;
    let nt = T::from_usize_lossy(n);
    let mut means = vec![T::zero(); x.cols];
    let mut scales = vec![T::one(); x.cols];
    if params.standardize {
        for j in 0..x.cols {
            let col = x.column(j);
            let m = col.iter().copied().sum::<T>() / nt;
            let var = col.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / nt;
            means[j] = m;
            scales[j] = if var > T::zero() { var.sqrt() } else { T::one() };
        }
    }
    let cols: Vec<Vec<T>> =
        (0..x.cols).map(|j| x.column(j).into_iter().map(|v| (v - means[j]) / scales[j]).collect()).collect();
    let prob = Problem { cols, y: y.to_vec(), alpha: T::lit(params.alpha), lambda: T::lit(params.lambda) };

    let mut w = vec![T::zero(); x.cols];
    let mut bias = prior_log_odds::<T>(y);
    let mut eta = vec![bias; n];
    let mut obj = prob.objective(&eta, &w);
    let mut trace = vec![obj];
    let quarter = T::lit(0.25);
    let tiny = T::lit(1e-300);

    for _ in 0..params.max_sweeps {
        let mut max_change = T::zero();

        // Unpenalized intercept: Newton step, falling back to the 1/4 bound.
        let p = probabilities(&eta);
        let g = p.iter().zip(y).map(|(&pi, &yi)| pi - if yi { T::one() } else { T::zero() }).sum::<T>() / nt;
        let h = p.iter().map(|&pi| pi * (T::one() - pi)).sum::<T>() / nt;
        for curv in [h.max(tiny), quarter] {
            let step = -g / curv;
            let trial: Vec<T> = eta.iter().map(|&e| e + step).collect();
            let trial_obj = prob.objective(&trial, &w);
            if trial_obj <= obj || curv == quarter {
                if trial_obj <= obj {
                    bias += step;
                    eta = trial;
                    obj = trial_obj;
                    max_change = max_change.max(step.abs());
                }
                break;
            }
        }

        for j in 0..x.cols {
            let col = &prob.cols[j];
            let p = probabilities(&eta);
            let mut g = T::zero();
            let mut h = T::zero();
            let mut sq = T::zero();
            for i in 0..n {
                let yi = if y[i] { T::one() } else { T::zero() };
                g += (p[i] - yi) * col[i];
                h += p[i] * (T::one() - p[i]) * col[i] * col[i];
                sq += col[i] * col[i];
            }
            g /= nt;
            h /= nt;
            let bound = quarter * sq / nt;
            if bound == T::zero() {
                continue;
            }
            let l1 = prob.lambda * prob.alpha;
            let l2 = prob.lambda * (T::one() - prob.alpha);
            for curv in [h.max(tiny), bound] {
                let new_w = soft_threshold(curv * w[j] - g, l1) / (curv + l2);
                let delta = new_w - w[j];
                if delta == T::zero() {
                    break;
                }
                let trial: Vec<T> = eta.iter().zip(col).map(|(&e, &c)| e + delta * c).collect();
                let old = w[j];
                w[j] = new_w;
                let trial_obj = prob.objective(&trial, &w);
                if trial_obj <= obj {
                    eta = trial;
                    obj = trial_obj;
                    max_change = max_change.max(delta.abs());
                    break;
                }
                w[j] = old;
            }
        }
        trace.push(obj);
        if max_change < T::lit(params.tol) {
            break;
        }
    }
    Ok((EnetModel { weights: w, bias, alpha: prob.alpha, lambda: prob.lambda, means, scales }, trace))
}

pub fn predict_enet<T: Scalar>(model: &EnetModel<T>, x: &Matrix<T>) -> Result<Vec<T>> {
    if x.cols != model.weights.len() {
        return Err(Error::DimensionMismatch { expected: model.weights.len(), got: x.cols });
    }
    Ok((0..x.rows)
        .map(|i| {
            let eta = x
                .row(i)
                .iter()
                .zip(&model.weights)
                .zip(model.means.iter().zip(&model.scales))
                .fold(model.bias, |acc, ((&v, &w), (&m, &s))| acc + w * (v - m) / s);
            sigmoid(eta)
        })
        .collect())
}

/// Picks λ from `grid` by k-fold cross-validated held-out log loss.
pub fn select_lambda_cv<T: Scalar>(
    x: &Matrix<T>,
    y: &[bool],
    params: &EnetParams,
    grid: &[f64],
    folds: usize,
    seed: u64,
) -> Result<f64> {
    check_training_input(x, y)?;
    if grid.is_empty() || folds < 2 {
        return Err(Error::Config("lambda grid must be nonempty and folds >= 2".into()));
    }
    let mut order: Vec<usize> = (0..x.rows).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let fold_of: Vec<usize> = {
        let mut f = vec![0; x.rows];
        for (rank, &i) in order.iter().enumerate() {
            f[i] = rank % folds;
        }
        f
    };
    let subset = |keep: &dyn Fn(usize) -> bool| -> (Matrix<T>, Vec<bool>) {
        let idx: Vec<usize> = (0..x.rows).filter(|&i| keep(i)).collect();
        let mut data = Vec::with_capacity(idx.len() * x.cols);
        for &i in &idx {
            data.extend_from_slice(x.row(i));
        }
        (Matrix { rows: idx.len(), cols: x.cols, data }, idx.iter().map(|&i| y[i]).collect())
    };
    let mut best = (f64::INFINITY, grid[0]);
    for &lambda in grid {
        let mut total = 0.0;
        for k in 0..folds {
            let (xt, yt) = subset(&|i| fold_of[i] != k);
            let (xv, yv) = subset(&|i| fold_of[i] == k);
            let model = match fit_enet(&xt, &yt, &EnetParams { lambda, ..*params }) {
                Ok(m) => m,
                Err(Error::SingleClassInput) => continue,
                Err(e) => return Err(e),
            };
            let p = predict_enet(&model, &xv)?;
            let eta: Vec<T> = p.iter().map(|&q| (q / (T::one() - q)).ln()).collect();
            total += mean_log_loss(&eta, &yv).as_f64();
        }
        if total < best.0 {
            best = (total, lambda);
        }
    }
    Ok(best.1)
}

impl<T: Scalar> EnetModel<T> {
    pub fn to_section(&self) -> Section {
        let list = |v: &[T]| v.iter().map(|&x| fmt_num(x)).collect::<Vec<_>>().join(" ");
        Section::new("enet")
            .with("alpha", fmt_num(self.alpha))
            .with("lambda", fmt_num(self.lambda))
            .with("bias", fmt_num(self.bias))
            .with("weights", list(&self.weights))
            .with("means", list(&self.means))
            .with("scales", list(&self.scales))
    }

    pub fn from_section(s: &Section) -> Result<Self> {
        let list = |key: &str| -> Result<Vec<T>> { s.get(key)?.split_whitespace().map(parse_num).collect() };
        let m = Self {
            alpha: parse_num(s.get("alpha")?)?,
            lambda: parse_num(s.get("lambda")?)?,
            bias: parse_num(s.get("bias")?)?,
            weights: list("weights")?,
            means: list("means")?,
            scales: list("scales")?,
        };
        if m.means.len() != m.weights.len() || m.scales.len() != m.weights.len() {
            return Err(Error::Checkpoint("enet vectors disagree in length".into()));
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::roc_auc;
    use rand::Rng;

    fn random_problem(n: usize, d: usize, seed: u64) -> (Matrix<f64>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..d).map(|j| [1.5, -0.8, 0.0, 0.3][j % 4]).collect();
        let mut data = Vec::new();
        let mut y = Vec::new();
        for _ in 0..n {
            let row: Vec<f64> = (0..d).map(|j| rng.gen_range(-2.0..2.0) * (j + 1) as f64 + j as f64).collect();
            let eta: f64 = row.iter().zip(&truth).map(|(a, b)| a * b / 2.0).sum();
            y.push(rng.gen_bool(sigmoid(eta)));
            data.extend(row);
        }
        (Matrix { rows: n, cols: d, data }, y)
    }

    #[test]
    fn huge_lambda_shrinks_to_prior() {
        let (x, y) = random_problem(60, 3, 1);
        let m = fit_enet(&x, &y, &EnetParams { lambda: 1e6, ..EnetParams::default() }).unwrap();
        assert!(m.weights.iter().all(|&w| w == 0.0));
        assert!((m.bias - prior_log_odds::<f64>(&y)).abs() < 1e-9);
    }

    #[test]
    fn separated_one_dimensional_sign() {
        let x = Matrix { rows: 6, cols: 1, data: vec![-3.0, -2.0, -1.0, 1.0, 2.0, 3.0] };
        let y = vec![false, false, false, true, true, true];
        let m = fit_enet(&x, &y, &EnetParams { lambda: 1e-2, ..EnetParams::default() }).unwrap();
        assert!(m.weights[0] > 0.0);
        let flipped: Vec<bool> = y.iter().map(|v| !v).collect();
        let m = fit_enet(&x, &flipped, &EnetParams { lambda: 1e-2, ..EnetParams::default() }).unwrap();
        assert!(m.weights[0] < 0.0);
    }

    /// Finite-difference gradient of the mean log loss in standardized
    /// coordinates, independent of the solver's own gradient code.
    fn numeric_gradient(m: &EnetModel<f64>, x: &Matrix<f64>, y: &[bool]) -> Vec<f64> {
        let loss = |w: &[f64]| {
            let eta: Vec<f64> = (0..x.rows)
                .map(|i| m.bias + (0..x.cols).map(|j| w[j] * (x.get(i, j) - m.means[j]) / m.scales[j]).sum::<f64>())
                .collect();
            mean_log_loss(&eta, y)
        };
        let h = 1e-6;
        (0..x.cols)
            .map(|j| {
                let mut up = m.weights.clone();
                let mut dn = m.weights.clone();
                up[j] += h;
                dn[j] -= h;
                (loss(&up) - loss(&dn)) / (2.0 * h)
            })
            .collect()
    }

    pub(crate) fn kkt_residual(m: &EnetModel<f64>, x: &Matrix<f64>, y: &[bool]) -> f64 {
        let grad = numeric_gradient(m, x, y);
        let (l1, l2) = (m.lambda * m.alpha, m.lambda * (1.0 - m.alpha));
        grad.iter()
            .zip(&m.weights)
            .map(|(&g, &w)| if w != 0.0 { (g + l1 * w.signum() + l2 * w).abs() } else { (g.abs() - l1).max(0.0) })
            .fold(0.0, f64::max)
    }

    #[test]
    fn kkt_conditions_hold() {
        for seed in 0..5 {
            let (x, y) = random_problem(50, 3, seed);
            for lambda in [1e-3, 0.05, 0.3] {
                let m = fit_enet(&x, &y, &EnetParams { lambda, ..EnetParams::default() }).unwrap();
                let r = kkt_residual(&m, &x, &y);
                assert!(r < 1e-6, "seed {seed} lambda {lambda}: {r}");
            }
        }
    }

    #[test]
    fn objective_non_increasing_per_sweep() {
        let (x, y) = random_problem(200, 4, 3);
        let (_, trace) = fit_enet_traced(&x, &y, &EnetParams { lambda: 0.01, ..EnetParams::default() }).unwrap();
        assert!(trace.len() > 2);
        for w in trace.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn predictions_and_errors() {
        let zero = EnetModel {
            weights: vec![0.0; 2],
            bias: 0.0,
            alpha: 0.5,
            lambda: 0.0,
            means: vec![0.0; 2],
            scales: vec![1.0; 2],
        };
        let x = Matrix { rows: 2, cols: 2, data: vec![1.0, 2.0, -3.0, 4.0] };
        assert_eq!(predict_enet(&zero, &x).unwrap(), vec![0.5, 0.5]);
        let narrow = Matrix { rows: 1, cols: 3, data: vec![0.0; 3] };
        assert!(matches!(predict_enet(&zero, &narrow), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(fit_enet(&x, &[true, true], &EnetParams::default()), Err(Error::SingleClassInput)));
        let nan = Matrix { rows: 2, cols: 2, data: vec![1.0, f64::NAN, 0.0, 0.0] };
        assert!(matches!(fit_enet(&nan, &[true, false], &EnetParams::default()), Err(Error::NonFiniteFeature(1))));
    }

    #[test]
    fn prediction_matches_log_domain_recomputation() {
        let (x, y) = random_problem(80, 3, 11);
        let m = fit_enet(&x, &y, &EnetParams::default()).unwrap();
        let p = predict_enet(&m, &x).unwrap();
        for i in 0..x.rows {
            let eta = m.bias + (0..3).map(|j| m.weights[j] * ((x.get(i, j) - m.means[j]) / m.scales[j])).sum::<f64>();
            let log_p = -(1.0 + (-eta).exp()).ln();
            assert!((p[i].ln() - log_p).abs() < 1e-12);
        }
        // Monotone in a positively weighted feature.
        let j = m.weights.iter().position(|&w| w > 0.0).unwrap();
        let mut bumped = x.clone();
        bumped.map_column(j, |v| v + 1.0);
        let q = predict_enet(&m, &bumped).unwrap();
        assert!(p.iter().zip(&q).all(|(a, b)| b > a));
    }

    #[test]
    fn auc_invariant_to_affine_rescaling() {
        let (x, y) = random_problem(150, 3, 5);
        let params = EnetParams { lambda: 0.01, ..EnetParams::default() };
        let m = fit_enet(&x, &y, &params).unwrap();
        let auc = roc_auc(&predict_enet(&m, &x).unwrap(), &y).unwrap();
        let mut scaled = x.clone();
        scaled.map_column(1, |v| 250.0 * v - 13.0);
        let ms = fit_enet(&scaled, &y, &params).unwrap();
        let auc_s = roc_auc(&predict_enet(&ms, &scaled).unwrap(), &y).unwrap();
        assert!((auc - auc_s).abs() <= 1e-12);
    }

    #[test]
    fn cross_validation_returns_grid_member() {
        let (x, y) = random_problem(120, 3, 2);
        let grid = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
        let l = select_lambda_cv(&x, &y, &EnetParams::default(), &grid, 5, 0).unwrap();
        assert!(grid.contains(&l));
        assert!(l < 1.0);
    }

    #[test]
    fn section_round_trip() {
        let (x, y) = random_problem(40, 3, 8);
        let m = fit_enet(&x, &y, &EnetParams::default()).unwrap();
        let back = EnetModel::<f64>::from_section(&m.to_section()).unwrap();
        assert_eq!(m, back);
    }
}
