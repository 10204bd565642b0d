//! Alternating least-squares recovery of a coefficient tensor train from point samples.
//!
//! Each sweep right-orthogonalizes the train, then visits the modes left to right. At
//! every mode the configured [`Microstep`] re-fits the component with the others held
//! fixed, after which the component's rank to the right is adapted. The iterate with the
//! best validation error is returned.

mod config;
mod microstep;
mod rank;
mod samples;

pub use config::RecoveryConfig;
pub use microstep::{
    local_gramian, microstep_by_name, microstep_l2, microstep_ls, microstep_r2als, microstep_rals, ridge_grid,
    ridge_path, Als, AlsL2, LocalGramian, LocalProblem, Microstep, MicrostepContext, MicrostepOutcome, R2als, Rals,
    RalsOutcome, EIGEN_FLOOR, LS_RCOND, MICROSTEPS, RIDGE_DECADES,
};
pub use rank::{rank_adapt, RankAdaptation, UNSTABLE_SCALE};
pub use samples::SampleSet;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::bases::{gramian_orthonormalize, gramian_rule, UnivariateBasis};
use crate::error::{Error, Result};
use crate::tensor::{fixed_interface, Component, TensorTrain};

#[derive(Debug, Clone, Serialize)]
pub struct RecoveryReport {
    #[serde(skip)]
    pub tt: TensorTrain,
    pub algorithm: String,
    /// Relative errors after each completed sweep.
    pub train_errors: Vec<f64>,
    pub validation_errors: Vec<f64>,
    /// Representation ranks after each completed sweep.
    pub rank_history: Vec<Vec<usize>>,
    /// Cross-validated λ per sweep and mode (`None` for unregularized microsteps).
    pub lambdas: Vec<Vec<Option<f64>>>,
    /// Sweep (1-based) whose iterate is returned; 0 is the initial guess.
    pub best_sweep: usize,
    pub underdetermined_microsteps: usize,
    pub floored_eigenvalues: usize,
    pub capped_rank_adaptations: usize,
    /// Error that aborted the last sweep, if any.
    pub failure: Option<String>,
    pub test_error: Option<f64>,
    pub final_ranks: Vec<usize>,
}

impl RecoveryReport {
    pub fn sweeps(&self) -> usize {
        self.train_errors.len()
    }

    pub fn best_validation_error(&self) -> Option<f64> {
        self.best_sweep.checked_sub(1).map(|k| self.validation_errors[k])
    }

    /// Evaluates the returned train on held-out samples and stores the result.
    pub fn evaluate_test(&mut self, test: &SampleSet, basis: &UnivariateBasis) -> Result<f64> {
        let e = test.relative_error_of(&self.tt, basis)?;
        self.test_error = Some(e);
        Ok(e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Relative size of the random part of the starting train.
pub const INITIAL_SPREAD: f64 = 0.1;

/// Rank-`r` starting point with unit-norm standard normal components, `r` clipped to
/// the dimension bounds of each unfolding.
pub fn initial_train<R: rand::Rng + ?Sized>(dims: &[usize], rank: usize, rng: &mut R) -> Result<TensorTrain> {
    let order = dims.len();
    let mut ranks = vec![1usize; order + 1];
    for k in 1..order {
        let left: usize = dims[..k].iter().fold(1usize, |a, &d| a.saturating_mul(d));
        let right: usize = dims[k..].iter().fold(1usize, |a, &d| a.saturating_mul(d));
        ranks[k] = rank.min(left).min(right);
    }
    let comps = (0..order)
        .map(|k| {
            let n = ranks[k] * dims[k] * ranks[k + 1];
            let mut data: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let norm = data.iter().map(|x| x * x).sum::<f64>().sqrt();
            data.iter_mut().for_each(|x| *x /= norm);
            Component::new(ranks[k], dims[k], ranks[k + 1], data)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorTrain::new(comps)
}

/// Rank-`r` starting point close to the rank-one train whose every component is `lead`.
///
/// Each component holds `lead` in its leading rank slice plus `spread` times standard
/// normal noise everywhere, then is scaled to unit norm.
pub fn perturbed_train<R: rand::Rng + ?Sized>(
    dims: &[usize],
    rank: usize,
    lead: &[f64],
    spread: f64,
    rng: &mut R,
) -> Result<TensorTrain> {
    if dims.iter().any(|&d| d != lead.len()) {
        return Err(Error::DimensionMismatch(format!("lead vector of length {} for modes {dims:?}", lead.len())));
    }
    let comps = initial_train(dims, rank, rng)?
        .components()
        .iter()
        .map(|c| {
            let (l, d, r) = c.shape();
            let mut data: Vec<f64> = c.data().iter().map(|x| spread * x).collect();
            for (j, v) in lead.iter().enumerate() {
                data[j * r] += v;
            }
            let norm = data.iter().map(|x| x * x).sum::<f64>().sqrt();
            data.iter_mut().for_each(|x| *x /= norm);
            Component::new(l, d, r, data)
        })
        .collect::<Result<Vec<_>>>()?;
    TensorTrain::new(comps)
}

/// Runs the configured ALS variant on `samples`, whose coordinates are expanded in
/// `basis` along every mode.
pub fn recover(samples: &SampleSet, config: &RecoveryConfig, basis: &UnivariateBasis) -> Result<RecoveryReport> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    if basis.dim() != config.dimension {
        return Err(Error::DimensionMismatch(format!(
            "basis dimension {} vs configured dimension {}",
            basis.dim(),
            config.dimension
        )));
    }
    let microstep = microstep_by_name(&config.algorithm)?;
    let order = samples.order();
    let (train, validation) = samples.split(config.validation_fraction, config.seed);
    let folds = config.cv_folds.min(train.len());
    let mut cv = config.cv();
    cv.folds = folds;
    let needs_cv = matches!(config.algorithm.as_str(), "als_l2" | "rals" | "r2als");
    if needs_cv && folds < 2 {
        return Err(Error::TooFewSamples { n: train.len(), folds: config.cv_folds });
    }

    // Working basis: raw, or orthonormalized with respect to the Gramian for R²ALS.
    let (work_basis, back_transform, per_mode_gram): (UnivariateBasis, Option<DMatrix<f64>>, Option<DMatrix<f64>>) =
        if microstep.orthonormalizes_basis() {
            let g = gramian_rule(&config.gramian)?.gramian(basis)?;
            let (b, t) = gramian_orthonormalize(basis, &g)?;
            (b, Some(t), None)
        } else if microstep.needs_local_gramian() {
            let g = gramian_rule(&config.gramian)?.gramian(basis)?;
            (basis.clone(), None, Some(g.matrix().clone()))
        } else {
            (basis.clone(), None, None)
        };
    let train_bv = train.basis_values(&work_basis)?;
    let val_bv = if validation.is_empty() { None } else { Some(validation.basis_values(&work_basis)?) };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = vec![basis.dim(); order];
    // A noisy copy of the constant function, the first basis function, in working coordinates.
    let mut lead = vec![0.0; basis.dim()];
    lead[0] = 1.0;
    if let Some(t) = &back_transform {
        let e1 = nalgebra::DVector::from_vec(lead);
        let c =
            t.clone().lu().solve(&e1).ok_or_else(|| Error::NotPositiveDefinite("singular basis transform".into()))?;
        lead = c.iter().copied().collect();
    }
    let mut tt = perturbed_train(&dims, config.initial_rank.min(config.max_rank), &lead, INITIAL_SPREAD, &mut rng)?;

    let errors = |tt: &TensorTrain| -> Result<(f64, f64)> {
        let tr = train.relative_error(&train_bv.evaluate(tt)?);
        let va = match &val_bv {
            Some(bv) => validation.relative_error(&bv.evaluate(tt)?),
            None => tr,
        };
        Ok((tr, va))
    };

    let mut report = RecoveryReport {
        tt: tt.clone(),
        algorithm: config.algorithm.clone(),
        train_errors: Vec::new(),
        validation_errors: Vec::new(),
        rank_history: Vec::new(),
        lambdas: Vec::new(),
        best_sweep: 0,
        underdetermined_microsteps: 0,
        floored_eigenvalues: 0,
        capped_rank_adaptations: 0,
        failure: None,
        test_error: None,
        final_ranks: Vec::new(),
    };
    let mut best_tt = tt.clone();
    let mut best_val = errors(&tt)?.1;
    let mut stale = 0;

    for _sweep in 0..config.max_sweeps {
        let outcome = (|| -> Result<Vec<Option<f64>>> {
            tt.right_orthogonalize();
            let mut lambdas = Vec::with_capacity(order);
            for m in 0..order {
                let stacks = fixed_interface(&tt, m)?;
                let problem = LocalProblem::new(&stacks, &train_bv, &train)?;
                let h = per_mode_gram.as_ref().map(|g| LocalGramian::from_stacks(&stacks, g).matrix);
                let ctx = MicrostepContext { problem: &problem, local_gramian: h.as_ref(), cv };
                let out = microstep.solve(&ctx)?;
                report.underdetermined_microsteps += usize::from(out.underdetermined);
                report.floored_eigenvalues += out.floored_eigenvalues;
                lambdas.push(out.lambda);
                tt.set_component(m, problem.component(&out.coef))?;
                if m + 1 < order {
                    let adapt = rank_adapt(&mut tt, m, config.theta, config.buffer, config.max_rank, &mut rng)?;
                    report.capped_rank_adaptations += usize::from(adapt.capped);
                }
            }
            Ok(lambdas)
        })();
        let lambdas = match outcome {
            Ok(l) => l,
            Err(e) => {
                report.failure = Some(e.to_string());
                break;
            }
        };
        let (tr, va) = errors(&tt)?;
        report.train_errors.push(tr);
        report.validation_errors.push(va);
        report.rank_history.push(tt.ranks());
        report.lambdas.push(lambdas);
        if !va.is_finite() {
            report.failure = Some("non-finite validation error".into());
            break;
        }
        if va < best_val * (1.0 - config.tolerance) || report.best_sweep == 0 && va <= best_val {
            best_val = va;
            best_tt = tt.clone();
            report.best_sweep = report.train_errors.len();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
    }

    if let Some(t) = back_transform {
        let comps = best_tt.components().iter().map(|c| c.transform_mode(&t)).collect();
        best_tt = TensorTrain::new(comps)?;
    }
    report.final_ranks = best_tt.ranks();
    report.tt = best_tt;
    Ok(report)
}
