use nalgebra::{DMatrix, DVector};

use super::samples::SampleSet;
use crate::bases::Gramian;
use crate::error::{Error, Result};
use crate::lasso::{argmin_prefer_first, cross_validate, lasso_cv_fit, CvConfig, CvReport};
use crate::linalg::{lstsq_min_norm, lstsq_qr, sym_eigen};
use crate::tensor::{design_matrix, fixed_interface, BasisValues, Component, InterfaceStacks, TensorTrain};

/// Relative singular-value cutoff for deciding that a design is rank deficient.
pub const LS_RCOND: f64 = 1e-12;
/// Eigenvalues of the local Gramian below this fraction of the largest are floored.
pub const EIGEN_FLOOR: f64 = 1e-12;
/// Ridge grid: `s_max * 10^-RIDGE_DECADES` at the bottom, `s_max` the largest eigenvalue
/// of `AᵀA`.
pub const RIDGE_DECADES: f64 = 8.0;

/// Weighted least-squares problem of one microstep: `design · vec(V_m) ≈ target`.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    pub design: DMatrix<f64>,
    pub target: DVector<f64>,
    pub shape: (usize, usize, usize),
}

impl LocalProblem {
    pub fn new(stacks: &InterfaceStacks, basis_values: &BasisValues, samples: &SampleSet) -> Result<Self> {
        let design = design_matrix(stacks, basis_values, samples.weights())?;
        let target = DVector::from_iterator(
            samples.len(),
            samples.values().iter().zip(samples.weights()).map(|(u, w)| w.sqrt() * u),
        );
        Ok(Self { design, target, shape: stacks.local_shape() })
    }

    pub fn n_samples(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_unknowns(&self) -> usize {
        self.design.ncols()
    }

    pub fn residual_norm_squared(&self, coef: &DVector<f64>) -> f64 {
        (&self.target - &self.design * coef).norm_squared()
    }

    pub fn component(&self, coef: &DVector<f64>) -> Component {
        let (l, d, r) = self.shape;
        Component::new(l, d, r, coef.iter().copied().collect()).expect("coefficient length matches local shape")
    }
}

#[derive(Debug, Clone)]
pub struct MicrostepOutcome {
    pub coef: DVector<f64>,
    /// Regularization parameter selected by cross-validation, if any.
    pub lambda: Option<f64>,
    /// Fewer samples than unknowns or a rank-deficient design.
    pub underdetermined: bool,
    pub floored_eigenvalues: usize,
}

/// Inputs shared by all microsteps.
#[derive(Debug, Clone, Copy)]
pub struct MicrostepContext<'a> {
    pub problem: &'a LocalProblem,
    /// Normalized local Gramian `H`, present for microsteps that ask for it.
    pub local_gramian: Option<&'a DMatrix<f64>>,
    pub cv: CvConfig,
}

/// One strategy for optimizing a single component with the others fixed.
pub trait Microstep: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether [`MicrostepContext::local_gramian`] must be supplied.
    fn needs_local_gramian(&self) -> bool {
        false
    }

    /// Whether the univariate basis is orthonormalized with respect to its Gramian before
    /// the sweeps start.
    fn orthonormalizes_basis(&self) -> bool {
        false
    }

    fn solve(&self, ctx: &MicrostepContext<'_>) -> Result<MicrostepOutcome>;
}

/// Names accepted by [`microstep_by_name`].
pub const MICROSTEPS: &[&str] = &["als", "als_l2", "rals", "r2als"];

pub fn microstep_by_name(name: &str) -> Result<Box<dyn Microstep>> {
    match name {
        "als" => Ok(Box::new(Als)),
        "als_l2" => Ok(Box::new(AlsL2)),
        "rals" => Ok(Box::new(Rals)),
        "r2als" => Ok(Box::new(R2als)),
        other => {
            Err(Error::UnknownStrategy { kind: "algorithm", name: other.into(), available: MICROSTEPS.join(", ") })
        }
    }
}

/// Unregularized least squares.
#[derive(Debug, Clone, Copy, Default)]
pub struct Als;

/// Ridge-regularized least squares with a cross-validated penalty.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlsL2;

/// Weighted LASSO in the eigenbasis of the local Gramian.
#[derive(Debug, Clone, Copy, Default)]
pub struct Rals;

/// Plain LASSO on a Gramian-orthonormalized basis.
#[derive(Debug, Clone, Copy, Default)]
pub struct R2als;

impl Microstep for Als {
    fn name(&self) -> &'static str {
        "als"
    }

    fn solve(&self, ctx: &MicrostepContext<'_>) -> Result<MicrostepOutcome> {
        let (coef, underdetermined) = microstep_ls(ctx.problem);
        Ok(MicrostepOutcome { coef, lambda: None, underdetermined, floored_eigenvalues: 0 })
    }
}

impl Microstep for AlsL2 {
    fn name(&self) -> &'static str {
        "als_l2"
    }

    fn solve(&self, ctx: &MicrostepContext<'_>) -> Result<MicrostepOutcome> {
        let (coef, report) = microstep_l2(ctx.problem, &ctx.cv)?;
        Ok(MicrostepOutcome {
            coef,
            lambda: Some(report.chosen_lambda),
            underdetermined: is_underdetermined(ctx.problem),
            floored_eigenvalues: 0,
        })
    }
}

impl Microstep for Rals {
    fn name(&self) -> &'static str {
        "rals"
    }

    fn needs_local_gramian(&self) -> bool {
        true
    }

    fn solve(&self, ctx: &MicrostepContext<'_>) -> Result<MicrostepOutcome> {
        let h =
            ctx.local_gramian.ok_or_else(|| Error::InvalidArgument("rals microstep needs the local gramian".into()))?;
        let out = microstep_rals(ctx.problem, h, &ctx.cv)?;
        Ok(MicrostepOutcome {
            coef: out.coef,
            lambda: Some(out.report.chosen_lambda),
            underdetermined: is_underdetermined(ctx.problem),
            floored_eigenvalues: out.floored,
        })
    }
}

impl Microstep for R2als {
    fn name(&self) -> &'static str {
        "r2als"
    }

    fn orthonormalizes_basis(&self) -> bool {
        true
    }

    fn solve(&self, ctx: &MicrostepContext<'_>) -> Result<MicrostepOutcome> {
        let (coef, report) = microstep_r2als(ctx.problem, &ctx.cv)?;
        Ok(MicrostepOutcome {
            coef,
            lambda: Some(report.chosen_lambda),
            underdetermined: is_underdetermined(ctx.problem),
            floored_eigenvalues: 0,
        })
    }
}

fn is_underdetermined(p: &LocalProblem) -> bool {
    p.n_samples() < p.n_unknowns()
}

/// Least-squares microstep. Returns the solution and whether the problem was
/// underdetermined, in which case the minimum-norm solution is returned.
pub fn microstep_ls(p: &LocalProblem) -> (DVector<f64>, bool) {
    match lstsq_qr(&p.design, &p.target, LS_RCOND) {
        Some(x) => (x, false),
        None => (lstsq_min_norm(&p.design, &p.target, LS_RCOND).0, true),
    }
}

/// Ridge solutions `argmin ||y - A v||² + λ ||v||²` for every λ of a grid, from one
/// eigendecomposition of `AᵀA`. λ = 0 gives the minimum-norm least-squares solution.
pub fn ridge_path(a: &DMatrix<f64>, y: &DVector<f64>, lambdas: &[f64]) -> Vec<DVector<f64>> {
    let (vals, vecs) = sym_eigen(&(a.transpose() * a));
    let smax = vals.last().copied().unwrap_or(0.0).max(0.0);
    let c = vecs.transpose() * (a.transpose() * y);
    lambdas
        .iter()
        .map(|&lambda| {
            let scaled = DVector::from_iterator(
                c.len(),
                vals.iter().zip(c.iter()).map(|(&s, &ck)| {
                    if lambda == 0.0 && s <= LS_RCOND * LS_RCOND * smax.max(f64::MIN_POSITIVE) {
                        0.0
                    } else {
                        ck / (s.max(0.0) + lambda)
                    }
                }),
            );
            &vecs * scaled
        })
        .collect()
}

/// Descending ridge grid anchored at the largest eigenvalue of `AᵀA`, with λ = 0 appended.
pub fn ridge_grid(a: &DMatrix<f64>, cv: &CvConfig) -> Vec<f64> {
    let smax = crate::linalg::svd(a).s.first().copied().unwrap_or(0.0).powi(2);
    let top = if smax > 0.0 { smax } else { 1.0 };
    CvConfig { decades: RIDGE_DECADES, ..*cv }.grid(top)
}

/// ℓ²-regularized microstep with the penalty chosen by K-fold cross-validation.
pub fn microstep_l2(p: &LocalProblem, cv: &CvConfig) -> Result<(DVector<f64>, CvReport)> {
    let lambdas = ridge_grid(&p.design, cv);
    let (mean_errors, fold_errors) = cross_validate(&p.design, &p.target, &lambdas, cv.folds, cv.seed, ridge_path)?;
    let chosen_index = argmin_prefer_first(&mean_errors);
    let coef = ridge_path(&p.design, &p.target, &lambdas[chosen_index..=chosen_index]).remove(0);
    Ok((
        coef,
        CvReport {
            chosen_lambda: lambdas[chosen_index],
            lambdas,
            mean_errors,
            fold_errors,
            chosen_index,
            seed: cv.seed,
            folds: cv.folds,
        },
    ))
}

/// Local Gramian `H = V̂_mᵀ (g ⊗ ... ⊗ g) V̂_m`, stored as `H / s` with `ln s`.
#[derive(Debug, Clone)]
pub struct LocalGramian {
    pub matrix: DMatrix<f64>,
    pub log_scale: f64,
}

impl LocalGramian {
    pub fn from_stacks(stacks: &InterfaceStacks, g: &DMatrix<f64>) -> Self {
        let (left, ll) = stacks.left_gram(g);
        let (right, lr) = stacks.right_gram(g);
        let mut matrix = left.kronecker(&g.kronecker(&right));
        matrix = (&matrix + matrix.transpose()) * 0.5;
        let s = matrix.amax();
        let (matrix, extra) = if s > 0.0 { (matrix / s, s.ln()) } else { (matrix, 0.0) };
        Self { matrix, log_scale: ll + lr + extra }
    }

    /// The unscaled matrix; may overflow for long trains.
    pub fn unscaled(&self) -> DMatrix<f64> {
        &self.matrix * self.log_scale.exp()
    }
}

/// Local Gramian of mode `m` for the per-mode Gramian `g`, contracted through the
/// interface stacks without forming `g^{⊗M}`.
pub fn local_gramian(tt: &TensorTrain, m: usize, g: &Gramian) -> Result<LocalGramian> {
    let stacks = fixed_interface(tt, m)?;
    if tt.dims().iter().any(|&d| d != g.dim()) {
        return Err(Error::DimensionMismatch(format!("gramian of size {} for dims {:?}", g.dim(), tt.dims())));
    }
    Ok(LocalGramian::from_stacks(&stacks, g.matrix()))
}

#[derive(Debug, Clone)]
pub struct RalsOutcome {
    pub coef: DVector<f64>,
    pub report: CvReport,
    pub floored: usize,
}

/// Restricted microstep: with `H = Q S Qᵀ` (ascending eigenvalues, floored at
/// `EIGEN_FLOOR * s_max`) and `D = S^{1/2}`, solve the standard LASSO for `U` on the
/// design `A Q D⁻¹` and return `V_m = Q D⁻¹ U`.
pub fn microstep_rals(p: &LocalProblem, h: &DMatrix<f64>, cv: &CvConfig) -> Result<RalsOutcome> {
    let dim = p.n_unknowns();
    if h.shape() != (dim, dim) {
        return Err(Error::DimensionMismatch(format!("local gramian {:?} for {dim} unknowns", h.shape())));
    }
    let (vals, q) = sym_eigen(h);
    let smax = vals.last().copied().unwrap_or(0.0);
    if !(smax > 0.0) {
        return Err(Error::NotPositiveDefinite("local gramian has no positive eigenvalue".into()));
    }
    let floor = EIGEN_FLOOR * smax;
    let floored = vals.iter().filter(|&&s| s < floor).count();
    let d_inv = DVector::from_iterator(dim, vals.iter().map(|&s| 1.0 / s.max(floor).sqrt()));
    let transform = &q * DMatrix::from_diagonal(&d_inv);
    let design = &p.design * &transform;
    let (sol, report) = lasso_cv_fit(&design, &p.target, &vec![1.0; dim], cv)?;
    Ok(RalsOutcome { coef: transform * sol.coef, report, floored })
}

/// Riesz-basis microstep: standard LASSO with unit weights on the local coordinates.
pub fn microstep_r2als(p: &LocalProblem, cv: &CvConfig) -> Result<(DVector<f64>, CvReport)> {
    let (sol, report) = lasso_cv_fit(&p.design, &p.target, &vec![1.0; p.n_unknowns()], cv)?;
    Ok((sol.coef, report))
}
