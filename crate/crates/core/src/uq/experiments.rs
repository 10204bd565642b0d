//! Phase diagrams of recovery error over (order, sample count), and the singular-value
//! spectra of plain versus Legendre-weighted Gaussian matrices.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::diffusion::Sampling;
use crate::bases::UnivariateBasis;
use crate::error::{Error, Result};
use crate::linalg::svd;
use crate::recovery::{recover, RecoveryConfig, SampleSet};

/// Size of the held-out test set of every phase-diagram run.
pub const TEST_SAMPLES: usize = 1000;

/// Mixes a base seed with run coordinates (SplitMix64 finalizer on each word).
pub fn derive_seed(base: u64, words: &[u64]) -> u64 {
    let mix = |mut z: u64| {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    };
    words.iter().fold(mix(base), |acc, &w| mix(acc ^ mix(w)))
}

/// Functions on `[-1, 1]^M` recovered in a phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseTarget {
    /// All Legendre coefficients equal to one: `Π_m Σ_{k<d} L_k(y_m)`.
    ConstantCoefficients,
    /// `exp(y_1 + ... + y_M)`.
    ExpSum,
}

impl PhaseTarget {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ones" | "constant" => Ok(Self::ConstantCoefficients),
            "exp" | "exp_sum" => Ok(Self::ExpSum),
            other => Err(Error::UnknownStrategy { kind: "target", name: other.into(), available: "ones, exp".into() }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::ConstantCoefficients => "ones",
            Self::ExpSum => "exp",
        }
    }

    pub fn evaluate(self, y: &[f64], basis: &UnivariateBasis) -> f64 {
        match self {
            Self::ConstantCoefficients => y.iter().map(|&t| basis.evaluate(t).iter().sum::<f64>()).product(),
            Self::ExpSum => y.iter().sum::<f64>().exp(),
        }
    }

    pub fn samples(self, order: usize, count: usize, seed: u64, basis: &UnivariateBasis) -> Result<SampleSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..count).map(|_| Sampling::Uniform.draw(order, &mut rng)).collect();
        SampleSet::from_fn(points, |y| self.evaluate(y, basis))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramConfig {
    pub orders: Vec<usize>,
    pub sample_counts: Vec<usize>,
    pub realizations: usize,
    pub target: PhaseTarget,
    pub test_samples: usize,
    pub seed: u64,
    /// Recovery settings shared by every run; its seed is replaced per run.
    pub recovery: RecoveryConfig,
}

impl Default for PhaseDiagramConfig {
    fn default() -> Self {
        Self {
            orders: vec![1, 2, 3, 4],
            sample_counts: vec![50, 100, 200, 400],
            realizations: 20,
            target: PhaseTarget::ExpSum,
            test_samples: TEST_SAMPLES,
            seed: 0,
            recovery: RecoveryConfig { dimension: 15, ..RecoveryConfig::default() },
        }
    }
}

impl PhaseDiagramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orders.is_empty() || self.orders.contains(&0) {
            return Err(Error::InvalidArgument("orders must be non-empty and positive".into()));
        }
        if self.sample_counts.is_empty() || self.sample_counts.contains(&0) {
            return Err(Error::InvalidArgument("sample counts must be non-empty and positive".into()));
        }
        if self.realizations == 0 || self.test_samples == 0 {
            return Err(Error::InvalidArgument("need at least one realization and one test sample".into()));
        }
        self.recovery.validate()
    }
}

/// One recovery run of a phase diagram: its training data, test data and seed are
/// functions of `(config.seed, order, count, realization)` only.
pub fn phase_run(config: &PhaseDiagramConfig, order: usize, count: usize, realization: usize) -> Result<f64> {
    let basis = UnivariateBasis::by_name(config.recovery.basis.name(), config.recovery.dimension)?;
    let seed = derive_seed(config.seed, &[order as u64, count as u64, realization as u64]);
    let train = config.target.samples(order, count, derive_seed(seed, &[0]), &basis)?;
    let test = config.target.samples(order, config.test_samples, derive_seed(seed, &[1]), &basis)?;
    let rc = RecoveryConfig { seed: derive_seed(seed, &[2]), ..config.recovery.clone() };
    let mut report = recover(&train, &rc, &basis)?;
    if let Some(msg) = &report.failure {
        return Err(Error::InvalidArgument(format!("recovery aborted: {msg}")));
    }
    report.evaluate_test(&test, &basis)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseDiagram {
    pub orders: Vec<usize>,
    pub sample_counts: Vec<usize>,
    /// `mean_errors[i][j]` for `orders[i]`, `sample_counts[j]`; NaN if any run failed.
    pub mean_errors: Vec<Vec<f64>>,
    /// Failed runs per cell.
    pub failures: Vec<Vec<usize>>,
}

impl PhaseDiagram {
    /// Long-format CSV `order,samples,mean_error,failures`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("order,samples,mean_error,failures\n");
        for (i, m) in self.orders.iter().enumerate() {
            for (j, n) in self.sample_counts.iter().enumerate() {
                let _ = writeln!(out, "{m},{n},{:e},{}", self.mean_errors[i][j], self.failures[i][j]);
            }
        }
        out
    }
}

/// Mean relative test error per `(order, sample count)` cell over independent
/// realizations; runs execute in parallel.
pub fn phase_diagram(config: &PhaseDiagramConfig) -> Result<PhaseDiagram> {
    config.validate()?;
    let runs: Vec<(usize, usize, usize)> = (0..config.orders.len())
        .flat_map(|i| {
            (0..config.sample_counts.len()).flat_map(move |j| (0..config.realizations).map(move |r| (i, j, r)))
        })
        .collect();
    let results: Vec<Option<f64>> = runs
        .par_iter()
        .map(|&(i, j, r)| phase_run(config, config.orders[i], config.sample_counts[j], r).ok())
        .collect();
    let (rows, cols) = (config.orders.len(), config.sample_counts.len());
    let mut sums = vec![vec![0.0; cols]; rows];
    let mut failures = vec![vec![0usize; cols]; rows];
    for (&(i, j, _), res) in runs.iter().zip(&results) {
        match res {
            Some(e) => sums[i][j] += e,
            None => failures[i][j] += 1,
        }
    }
    let mean_errors = sums
        .iter()
        .zip(&failures)
        .map(|(row, fails)| {
            row.iter()
                .zip(fails)
                .map(|(&s, &f)| if f > 0 { f64::NAN } else { s / config.realizations as f64 })
                .collect()
        })
        .collect();
    Ok(PhaseDiagram {
        orders: config.orders.clone(),
        sample_counts: config.sample_counts.clone(),
        mean_errors,
        failures,
    })
}

/// Entrywise weights applied to the random matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumWeight {
    /// `ω ≡ 1`.
    Ones,
    /// `ω_ij = sqrt(2i + 1) sqrt(2j + 1)`, the sup-norms of normalized Legendre polynomials.
    Legendre,
}

impl SpectrumWeight {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "ones" => Ok(Self::Ones),
            "legendre" => Ok(Self::Legendre),
            other => {
                Err(Error::UnknownStrategy { kind: "weight", name: other.into(), available: "ones, legendre".into() })
            }
        }
    }

    pub fn matrix(self, d: usize) -> DMatrix<f64> {
        match self {
            Self::Ones => DMatrix::from_element(d, d, 1.0),
            Self::Legendre => DMatrix::from_fn(d, d, |i, j| ((2 * i + 1) as f64).sqrt() * ((2 * j + 1) as f64).sqrt()),
        }
    }
}

/// Share of `Σ σ_i` carried by `σ_k, σ_{k+1}, ...` (0-based, descending order).
pub fn tail_mass(sigma: &[f64], k: usize) -> f64 {
    let total: f64 = sigma.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    sigma.iter().skip(k).sum::<f64>() / total
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub d: usize,
    pub weight: SpectrumWeight,
    /// Tail index `k = d / 2`.
    pub tail_index: usize,
    /// Descending singular values of `X` per realization.
    pub plain: Vec<Vec<f64>>,
    /// Descending singular values of `ω ⊙ X` per realization.
    pub weighted: Vec<Vec<f64>>,
}

impl SpectrumReport {
    /// Weighted over plain tail mass beyond `tail_index`, per realization.
    pub fn tail_ratios(&self) -> Vec<f64> {
        self.plain
            .iter()
            .zip(&self.weighted)
            .map(|(p, w)| tail_mass(w, self.tail_index) / tail_mass(p, self.tail_index))
            .collect()
    }

    /// Fraction of realizations whose weighted tail mass is strictly smaller.
    pub fn faster_decay_fraction(&self) -> f64 {
        let ratios = self.tail_ratios();
        ratios.iter().filter(|&&r| r < 1.0).count() as f64 / ratios.len().max(1) as f64
    }

    pub fn median_tail_ratio(&self) -> f64 {
        let mut r = self.tail_ratios();
        r.sort_by(f64::total_cmp);
        match r.len() {
            0 => f64::NAN,
            n if n % 2 == 1 => r[n / 2],
            n => 0.5 * (r[n / 2 - 1] + r[n / 2]),
        }
    }

    /// Long-format CSV `realization,matrix,index,sigma`, each spectrum normalized by
    /// its largest value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("realization,matrix,index,sigma\n");
        for (r, (p, w)) in self.plain.iter().zip(&self.weighted).enumerate() {
            for (label, s) in [("plain", p), ("weighted", w)] {
                let top = s.first().copied().filter(|&t| t > 0.0).unwrap_or(1.0);
                for (i, v) in s.iter().enumerate() {
                    let _ = writeln!(out, "{r},{label},{i},{:e}", v / top);
                }
            }
        }
        out
    }
}

/// Singular values of `realizations` standard normal `d x d` matrices `X` and of
/// `ω ⊙ X`. Realization `r` draws from a stream seeded by `(seed, r)`.
pub fn spectrum_experiment(d: usize, weight: SpectrumWeight, realizations: usize, seed: u64) -> Result<SpectrumReport> {
    if d == 0 || realizations == 0 {
        return Err(Error::InvalidArgument("need d >= 1 and at least one realization".into()));
    }
    let omega = weight.matrix(d);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..realizations)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[r as u64]));
            let x = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
            let wx = x.component_mul(&omega);
            (svd(&x).s, svd(&wx).s)
        })
        .collect();
    let (plain, weighted) = pairs.into_iter().unzip();
    Ok(SpectrumReport { d, weight, tail_index: d / 2, plain, weighted })
}
