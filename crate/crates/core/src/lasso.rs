//! Weighted LASSO
//!
//! `minimize ||y - A v||² + λ Σ_k ω_k |v_k|`
//!
//! solved by cyclic coordinate descent on the Gram matrix `AᵀA`, with K-fold
//! cross-validation over a logarithmic λ grid.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::lstsq_min_norm;

/// Singular values below this fraction of the largest are dropped by the unregularized
/// (λ = 0) least-squares endpoint.
pub const LSTSQ_RCOND: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub a: &'a DMatrix<f64>,
    pub y: &'a DVector<f64>,
    pub weights: &'a [f64],
    pub lambda: f64,
}

impl LassoProblem<'_> {
    pub fn validate(&self) -> Result<()> {
        if self.a.nrows() != self.y.len() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, target has {} entries",
                self.a.nrows(),
                self.y.len()
            )));
        }
        if self.weights.len() != self.a.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} coefficients",
                self.weights.len(),
                self.a.ncols()
            )));
        }
        if self.weights.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("coordinate weights must be positive and finite".into()));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!("λ = {} must be non-negative", self.lambda)));
        }
        if self.a.iter().chain(self.y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("design or target contains NaN/Inf".into()));
        }
        Ok(())
    }

    pub fn objective(&self, v: &DVector<f64>) -> f64 {
        let r = self.y - self.a * v;
        r.norm_squared() + self.lambda * weighted_l1(self.weights, v)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LassoOptions {
    pub max_sweeps: usize,
    /// Relative objective change below which a sweep counts as stagnant.
    pub rel_tol: f64,
    /// KKT residual tolerance, relative to `max(1, 2 ||Aᵀy||_inf)`.
    pub kkt_tol: f64,
}

impl Default for LassoOptions {
    fn default() -> Self {
        Self { max_sweeps: 10_000, rel_tol: 1e-10, kkt_tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct LassoSolution {
    pub coef: DVector<f64>,
    pub sweeps: usize,
    pub kkt_residual: f64,
    pub converged: bool,
}

impl LassoSolution {
    pub fn support_size(&self) -> usize {
        self.coef.iter().filter(|&&v| v != 0.0).count()
    }
}

fn weighted_l1(weights: &[f64], v: &DVector<f64>) -> f64 {
    weights.iter().zip(v.iter()).map(|(w, x)| w * x.abs()).sum()
}

pub fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Largest violation of the optimality conditions at `v`:
/// `|2 a_kᵀ(Av - y) + λ ω_k sign(v_k)|` on the support and
/// `max(|2 a_kᵀ(Av - y)| - λ ω_k, 0)` off it.
pub fn kkt_residual(p: &LassoProblem<'_>, v: &DVector<f64>) -> f64 {
    let g = (p.a.transpose() * (p.a * v - p.y)) * 2.0;
    kkt_from_gradient(&g, v, p.weights, p.lambda)
}

fn kkt_from_gradient(g: &DVector<f64>, v: &DVector<f64>, weights: &[f64], lambda: f64) -> f64 {
    g.iter()
        .zip(v.iter())
        .zip(weights)
        .map(
            |((&gk, &vk), &wk)| {
                if vk != 0.0 {
                    (gk + lambda * wk * vk.signum()).abs()
                } else {
                    (gk.abs() - lambda * wk).max(0.0)
                }
            },
        )
        .fold(0.0, f64::max)
}

/// Sufficient statistics `AᵀA`, `Aᵀy` of a least-squares problem.
#[derive(Debug, Clone)]
struct GramSystem {
    gram: DMatrix<f64>,
    corr: DVector<f64>,
}

impl GramSystem {
    fn new(a: &DMatrix<f64>, y: &DVector<f64>) -> Self {
        Self { gram: a.transpose() * a, corr: a.transpose() * y }
    }

    fn solve(&self, weights: &[f64], lambda: f64, warm: Option<&DVector<f64>>, opts: &LassoOptions) -> LassoSolution {
        let p = self.corr.len();
        let mut v = warm.cloned().unwrap_or_else(|| DVector::zeros(p));
        let mut q = &self.gram * &v; // AᵀA v
        let kkt_scale = (2.0 * self.corr.amax()).max(1.0);
        let penalty = |v: &DVector<f64>| lambda * weighted_l1(weights, v);
        // objective up to the constant ||y||²
        let objective = |v: &DVector<f64>, q: &DVector<f64>| v.dot(q) - 2.0 * v.dot(&self.corr) + penalty(v);
        let mut obj = objective(&v, &q);
        let mut sweeps = 0;
        let mut kkt = f64::INFINITY;
        while sweeps < opts.max_sweeps {
            sweeps += 1;
            for k in 0..p {
                let gkk = self.gram[(k, k)];
                if gkk <= 0.0 {
                    if v[k] != 0.0 {
                        let delta = -v[k];
                        q.axpy(delta, &self.gram.column(k), 1.0);
                        v[k] = 0.0;
                    }
                    continue;
                }
                let rho = self.corr[k] - q[k] + gkk * v[k];
                let new = soft_threshold(rho, 0.5 * lambda * weights[k]) / gkk;
                let delta = new - v[k];
                if delta != 0.0 {
                    q.axpy(delta, &self.gram.column(k), 1.0);
                    v[k] = new;
                }
            }
            let new_obj = objective(&v, &q);
            let change = (obj - new_obj).abs();
            obj = new_obj;
            if change <= opts.rel_tol * obj.abs().max(self.corr.amax().powi(2).min(1.0)).max(f64::MIN_POSITIVE)
                || change == 0.0
            {
                q = &self.gram * &v;
                let grad = (&q - &self.corr) * 2.0;
                kkt = kkt_from_gradient(&grad, &v, weights, lambda);
                if kkt <= opts.kkt_tol * kkt_scale {
                    return LassoSolution { coef: v, sweeps, kkt_residual: kkt, converged: true };
                }
            }
        }
        let grad = (&self.gram * &v - &self.corr) * 2.0;
        kkt = kkt.min(kkt_from_gradient(&grad, &v, weights, lambda));
        LassoSolution { coef: v, sweeps, kkt_residual: kkt, converged: false }
    }
}

/// Solves a weighted LASSO problem by coordinate descent.
pub fn lasso_solve(p: &LassoProblem<'_>) -> Result<LassoSolution> {
    lasso_solve_with(p, &LassoOptions::default(), None)
}

pub fn lasso_solve_with(
    p: &LassoProblem<'_>,
    opts: &LassoOptions,
    warm: Option<&DVector<f64>>,
) -> Result<LassoSolution> {
    p.validate()?;
    let sol = GramSystem::new(p.a, p.y).solve(p.weights, p.lambda, warm, opts);
    if !sol.converged {
        return Err(Error::NotConverged { iterations: sol.sweeps, residual: sol.kkt_residual });
    }
    Ok(sol)
}

/// Smallest λ that certainly yields the zero solution, `2 ||Aᵀy||_inf / min ω`.
pub fn lambda_max(a: &DMatrix<f64>, y: &DVector<f64>, weights: &[f64]) -> f64 {
    let wmin = weights.iter().copied().fold(f64::INFINITY, f64::min);
    2.0 * (a.transpose() * y).amax() / wmin
}

/// Cross-validation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvConfig {
    pub folds: usize,
    /// The grid spans `λ_max` down to `λ_max * 10^-decades`.
    pub decades: f64,
    pub points: usize,
    /// Appends the unregularized endpoint λ = 0, solved as minimum-norm least squares.
    pub include_zero: bool,
    pub seed: u64,
    /// Sweep cap for the per-fold path solves.
    pub path_max_sweeps: usize,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self { folds: 10, decades: 8.0, points: 33, include_zero: true, seed: 0, path_max_sweeps: 2_000 }
    }
}

impl CvConfig {
    /// Descending λ grid anchored at `lmax`.
    pub fn grid(&self, lmax: f64) -> Vec<f64> {
        let mut grid: Vec<f64> = if self.points <= 1 {
            vec![lmax]
        } else {
            (0..self.points).map(|k| lmax * 10f64.powf(-self.decades * k as f64 / (self.points - 1) as f64)).collect()
        };
        if self.include_zero {
            grid.push(0.0);
        }
        grid
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub lambdas: Vec<f64>,
    /// Mean held-out squared error per λ.
    pub mean_errors: Vec<f64>,
    /// `fold_errors[f][j]`: held-out mean squared error of fold `f` at `lambdas[j]`.
    pub fold_errors: Vec<Vec<f64>>,
    pub chosen_index: usize,
    pub chosen_lambda: f64,
    pub seed: u64,
    pub folds: usize,
}

/// Deterministic fold label per row: a seeded shuffle dealt round-robin.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut label = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        label[row] = pos % folds;
    }
    label
}

fn select_rows(a: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Index of the smallest error, preferring the earliest (largest λ) among ties.
pub fn argmin_prefer_first(errors: &[f64]) -> usize {
    let min = errors.iter().copied().filter(|e| e.is_finite()).fold(f64::INFINITY, f64::min);
    let tol = 1e-12 * min.abs();
    errors.iter().position(|&e| e <= min + tol).unwrap_or(0)
}

/// Generic K-fold driver: `path` fits every λ of the grid on a training split and
/// returns one coefficient vector per λ.
pub(crate) fn cross_validate<F>(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    lambdas: &[f64],
    folds: usize,
    seed: u64,
    path: F,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, &[f64]) -> Vec<DVector<f64>> + Sync,
{
    let n = a.nrows();
    if folds < 2 || n < folds {
        return Err(Error::TooFewSamples { n, folds });
    }
    let labels = fold_assignment(n, folds, seed);
    let fold_errors: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..n).filter(|&i| labels[i] != f).collect();
            let test: Vec<usize> = (0..n).filter(|&i| labels[i] == f).collect();
            let a_tr = select_rows(a, &train);
            let y_tr = DVector::from_iterator(train.len(), train.iter().map(|&i| y[i]));
            let a_te = select_rows(a, &test);
            let y_te = DVector::from_iterator(test.len(), test.iter().map(|&i| y[i]));
            path(&a_tr, &y_tr, lambdas).iter().map(|v| (&y_te - &a_te * v).norm_squared() / test.len() as f64).collect()
        })
        .collect();
    let mean = (0..lambdas.len()).map(|j| fold_errors.iter().map(|e| e[j]).sum::<f64>() / folds as f64).collect();
    Ok((mean, fold_errors))
}

/// LASSO solutions along a descending λ grid with warm starts. λ = 0 is solved as
/// minimum-norm least squares.
pub fn lasso_path(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
    lambdas: &[f64],
    opts: &LassoOptions,
) -> Vec<LassoSolution> {
    let sys = GramSystem::new(a, y);
    let mut warm: Option<DVector<f64>> = None;
    lambdas
        .iter()
        .map(|&lambda| {
            let sol = if lambda == 0.0 {
                let (coef, _) = lstsq_min_norm(a, y, LSTSQ_RCOND);
                let grad = (&sys.gram * &coef - &sys.corr) * 2.0;
                let kkt = kkt_from_gradient(&grad, &coef, weights, 0.0);
                LassoSolution { coef, sweeps: 0, kkt_residual: kkt, converged: true }
            } else {
                sys.solve(weights, lambda, warm.as_ref(), opts)
            };
            warm = Some(sol.coef.clone());
            sol
        })
        .collect()
}

/// Chooses λ by K-fold cross-validation on the grid from [`CvConfig::grid`].
pub fn cv_select_lambda(a: &DMatrix<f64>, y: &DVector<f64>, weights: &[f64], cfg: &CvConfig) -> Result<CvReport> {
    LassoProblem { a, y, weights, lambda: 0.0 }.validate()?;
    let lambdas = cfg.grid(lambda_max(a, y, weights));
    let opts = LassoOptions { max_sweeps: cfg.path_max_sweeps, ..LassoOptions::default() };
    let (mean_errors, fold_errors) = cross_validate(a, y, &lambdas, cfg.folds, cfg.seed, |a, y, l| {
        lasso_path(a, y, weights, l, &opts).into_iter().map(|s| s.coef).collect()
    })?;
    let chosen_index = argmin_prefer_first(&mean_errors);
    Ok(CvReport {
        chosen_lambda: lambdas[chosen_index],
        lambdas,
        mean_errors,
        fold_errors,
        chosen_index,
        seed: cfg.seed,
        folds: cfg.folds,
    })
}

/// Cross-validated LASSO fit: λ selection followed by a full-data solve along the grid
/// down to the chosen λ.
pub fn lasso_cv_fit(
    a: &DMatrix<f64>,
    y: &DVector<f64>,
    weights: &[f64],
    cfg: &CvConfig,
) -> Result<(LassoSolution, CvReport)> {
    let report = cv_select_lambda(a, y, weights, cfg)?;
    let path = &report.lambdas[..=report.chosen_index];
    let sol = lasso_path(a, y, weights, path, &LassoOptions::default()).pop().expect("non-empty path");
    Ok((sol, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_matrix(n: usize, p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        DMatrix::from_fn(n, p, |_, _| rng.sample(StandardNormal))
    }

    /// Proximal gradient (ISTA) with a fixed step, independent of coordinate descent.
    fn ista(a: &DMatrix<f64>, y: &DVector<f64>, w: &[f64], lambda: f64, iters: usize) -> DVector<f64> {
        let l = 2.0 * crate::linalg::svd(a).s[0].powi(2);
        let step = 1.0 / l;
        let mut v = DVector::zeros(a.ncols());
        for _ in 0..iters {
            let g = a.transpose() * (a * &v - y) * 2.0;
            let z = &v - g * step;
            v = DVector::from_iterator(
                z.len(),
                z.iter().enumerate().map(|(k, &zk)| soft_threshold(zk, step * lambda * w[k])),
            );
        }
        v
    }

    #[test]
    fn unregularized_square_system_is_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(4, 4, &mut rng) + DMatrix::identity(4, 4) * 3.0;
        let y = DVector::from_fn(4, |_, _| rng.sample(StandardNormal));
        let sol = lasso_solve(&LassoProblem { a: &a, y: &y, weights: &[1.0; 4], lambda: 0.0 }).unwrap();
        let exact = a.clone().lu().solve(&y).unwrap();
        let err = (sol.coef - exact).amax();
        assert!(err < 1e-8, "{err:e} after {} sweeps", sol.sweeps);
    }

    #[test]
    fn full_shrinkage_above_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(10, 4, &mut rng);
        let y = DVector::from_fn(10, |_, _| rng.sample(StandardNormal));
        let w = [1.0, 2.0, 0.5, 1.5];
        let lmax = lambda_max(&a, &y, &w);
        let sol = lasso_solve(&LassoProblem { a: &a, y: &y, weights: &w, lambda: lmax }).unwrap();
        assert!(sol.coef.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_proximal_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(5, 3, &mut rng);
        let y = DVector::from_fn(5, |_, _| rng.sample(StandardNormal));
        let w = [1.0; 3];
        let sol = lasso_solve(&LassoProblem { a: &a, y: &y, weights: &w, lambda: 0.1 }).unwrap();
        let oracle = ista(&a, &y, &w, 0.1, 200_000);
        assert!((sol.coef - oracle).amax() < 1e-6);
    }

    #[test]
    fn orthonormal_design_soft_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (q, _) = crate::linalg::qr_thin(&random_matrix(8, 4, &mut rng));
        let y = DVector::from_fn(8, |_, _| rng.sample(StandardNormal));
        let w = [1.0, 0.5, 2.0, 1.0];
        let lambda = 0.4;
        let sol = lasso_solve(&LassoProblem { a: &q, y: &y, weights: &w, lambda }).unwrap();
        let aty = q.transpose() * &y;
        for k in 0..4 {
            assert!((sol.coef[k] - soft_threshold(aty[k], lambda * w[k] / 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn kkt_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let a = random_matrix(12, 6, &mut rng);
            let y = DVector::from_fn(12, |_, _| rng.sample(StandardNormal));
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(0.5..2.0)).collect();
            let p = LassoProblem { a: &a, y: &y, weights: &w, lambda: 0.3 };
            let sol = lasso_solve(&p).unwrap();
            assert!(kkt_residual(&p, &sol.coef) <= 1e-8);
        }
    }

    #[test]
    fn homogeneity() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_matrix(10, 4, &mut rng);
        let y = DVector::from_fn(10, |_, _| rng.sample(StandardNormal));
        let w = [1.0; 4];
        let base = lasso_solve(&LassoProblem { a: &a, y: &y, weights: &w, lambda: 0.5 }).unwrap();
        let y3 = &y * 3.0;
        let scaled = lasso_solve(&LassoProblem { a: &a, y: &y3, weights: &w, lambda: 1.5 }).unwrap();
        assert!((scaled.coef - base.coef * 3.0).amax() < 1e-9);
    }

    #[test]
    fn invalid_problems_are_rejected() {
        let a = DMatrix::from_element(2, 2, 1.0);
        let y = DVector::from_element(2, 1.0);
        assert!(lasso_solve(&LassoProblem { a: &a, y: &y, weights: &[1.0, 0.0], lambda: 0.1 }).is_err());
        assert!(lasso_solve(&LassoProblem { a: &a, y: &y, weights: &[1.0], lambda: 0.1 }).is_err());
        let bad = DVector::from_vec(vec![f64::NAN, 1.0]);
        assert!(lasso_solve(&LassoProblem { a: &a, y: &bad, weights: &[1.0, 1.0], lambda: 0.1 }).is_err());
    }

    #[test]
    fn non_convergence_is_reported() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_matrix(20, 10, &mut rng);
        let y = DVector::from_fn(20, |_, _| rng.sample(StandardNormal));
        let p = LassoProblem { a: &a, y: &y, weights: &[1.0; 10], lambda: 1e-3 };
        let opts = LassoOptions { max_sweeps: 1, ..LassoOptions::default() };
        assert!(matches!(lasso_solve_with(&p, &opts, None), Err(Error::NotConverged { iterations: 1, .. })));
    }

    #[test]
    fn cv_recovers_one_sparse_direction() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_matrix(60, 8, &mut rng);
        let y = a.column(3) * 2.0;
        let w = [1.0; 8];
        let (sol, report) = lasso_cv_fit(&a, &y, &w, &CvConfig::default()).unwrap();
        assert!(
            report.mean_errors[report.chosen_index] <= report.mean_errors.iter().copied().fold(f64::INFINITY, f64::min)
        );
        let support: Vec<usize> = (0..8).filter(|&k| sol.coef[k].abs() > 1e-8).collect();
        assert_eq!(support, vec![3]);
    }

    #[test]
    fn zero_target_picks_lambda_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_matrix(30, 5, &mut rng);
        let y = DVector::zeros(30);
        let report = cv_select_lambda(&a, &y, &[1.0; 5], &CvConfig::default()).unwrap();
        assert_eq!(report.chosen_index, 0);
        assert_eq!(report.chosen_lambda, report.lambdas[0]);
    }

    #[test]
    fn duplicated_rows_give_identical_folds() {
        let row = [1.0, -2.0, 0.5];
        let a = DMatrix::from_fn(8, 3, |_, j| row[j]);
        let y = DVector::from_element(8, 0.7);
        let cfg = CvConfig { folds: 2, ..CvConfig::default() };
        let report = cv_select_lambda(&a, &y, &[1.0; 3], &cfg).unwrap();
        assert_eq!(report.fold_errors[0], report.fold_errors[1]);
    }

    #[test]
    fn too_few_samples_for_folds() {
        let a = DMatrix::from_element(5, 2, 1.0);
        let y = DVector::from_element(5, 1.0);
        assert!(matches!(
            cv_select_lambda(&a, &y, &[1.0; 2], &CvConfig::default()),
            Err(Error::TooFewSamples { n: 5, folds: 10 })
        ));
    }

    #[test]
    fn grid_shape() {
        let cfg = CvConfig::default();
        let g = cfg.grid(2.0);
        assert_eq!(g.len(), 34);
        assert_eq!(g[0], 2.0);
        assert!((g[4] - 0.2).abs() < 1e-15);
        assert!((g[32] - 2e-8).abs() < 1e-20);
        assert_eq!(g[33], 0.0);
    }

    #[test]
    fn fold_assignment_is_balanced_and_deterministic() {
        let a = fold_assignment(23, 10, 5);
        assert_eq!(a, fold_assignment(23, 10, 5));
        for f in 0..10 {
            let c = a.iter().filter(|&&x| x == f).count();
            assert!(c == 2 || c == 3);
        }
    }
}
