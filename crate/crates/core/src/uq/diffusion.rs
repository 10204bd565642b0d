//! Parametric diffusion problem `-div(a(x, y) grad w) = f` on the unit square with
//! homogeneous Dirichlet data, discretized by a 5-point finite-difference scheme.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recovery::SampleSet;

/// Number of parameters in the benchmark models.
pub const DEFAULT_PARAMETERS: usize = 20;
/// Default number of grid intervals per side.
pub const DEFAULT_GRID: usize = 64;
/// Smallest grid accepted by [`solve_diffusion`].
pub const MIN_GRID: usize = 8;
/// Relative residual at which conjugate gradients stops.
pub const CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    /// `1 + (6/π²) Σ m⁻² s_m(x) y_m` with `y ∈ [-1, 1]^M`.
    Affine,
    /// `exp(H_M⁻¹ Σ m⁻¹ s_m(x) y_m)` with `y ∈ R^M`.
    Lognormal,
}

impl CoefficientKind {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "affine" => Ok(Self::Affine),
            "lognormal" => Ok(Self::Lognormal),
            other => Err(Error::UnknownStrategy {
                kind: "coefficient model",
                name: other.into(),
                available: "affine, lognormal".into(),
            }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Affine => "affine",
            Self::Lognormal => "lognormal",
        }
    }

    /// Parameter distribution the model is posed on.
    pub fn natural_sampling(self) -> Sampling {
        match self {
            Self::Affine => Sampling::Uniform,
            Self::Lognormal => Sampling::Gaussian,
        }
    }
}

/// Parameter distribution for sample generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    /// Uniform on `[-1, 1]^M`.
    Uniform,
    /// Standard normal on `R^M`.
    Gaussian,
}

impl Sampling {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            other => Err(Error::UnknownStrategy {
                kind: "sampling",
                name: other.into(),
                available: "uniform, gaussian".into(),
            }),
        }
    }

    pub fn draw(self, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        match self {
            Self::Uniform => {
                let u = Uniform::new_inclusive(-1.0, 1.0).expect("valid bounds");
                (0..m).map(|_| u.sample(rng)).collect()
            }
            Self::Gaussian => (0..m).map(|_| StandardNormal.sample(rng)).collect(),
        }
    }
}

/// Diffusion coefficient `a(x, y)` built from the modes
/// `s_m(x) = sin(ϖ̂_m x_1) sin(ϖ̌_m x_2)` with `ϖ̂_m = π⌊m/2⌋`, `ϖ̌_m = π⌈m/2⌉`.
///
/// The first mode has `ϖ̂_1 = 0` and therefore vanishes identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffusionModel {
    pub kind: CoefficientKind,
    pub parameters: usize,
}

impl DiffusionModel {
    pub fn affine() -> Self {
        Self { kind: CoefficientKind::Affine, parameters: DEFAULT_PARAMETERS }
    }

    pub fn lognormal() -> Self {
        Self { kind: CoefficientKind::Lognormal, parameters: DEFAULT_PARAMETERS }
    }

    /// `(ϖ̂_m, ϖ̌_m)` for 1-based `m`.
    pub fn frequencies(m: usize) -> (f64, f64) {
        (PI * (m / 2) as f64, PI * m.div_ceil(2) as f64)
    }

    /// Coefficient in front of `s_m(x) y_m`.
    pub fn amplitude(&self, m: usize) -> f64 {
        let m = m as f64;
        match self.kind {
            CoefficientKind::Affine => 6.0 / (PI * PI) / (m * m),
            CoefficientKind::Lognormal => 1.0 / (harmonic_number(self.parameters) * m),
        }
    }

    fn check_parameters(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.parameters {
            return Err(Error::DimensionMismatch(format!("{} parameters, model expects {}", y.len(), self.parameters)));
        }
        Ok(())
    }

    pub fn coefficient(&self, x: [f64; 2], y: &[f64]) -> Result<f64> {
        self.check_parameters(y)?;
        let s: f64 = y
            .iter()
            .enumerate()
            .map(|(k, &ym)| {
                let (wh, wc) = Self::frequencies(k + 1);
                self.amplitude(k + 1) * (wh * x[0]).sin() * (wc * x[1]).sin() * ym
            })
            .sum();
        Ok(self.link(s))
    }

    fn link(&self, s: f64) -> f64 {
        match self.kind {
            CoefficientKind::Affine => 1.0 + s,
            CoefficientKind::Lognormal => s.exp(),
        }
    }

    /// Coefficient on the `(n + 1)²` nodes of the uniform grid, row-major in `x_2`.
    pub fn nodal_coefficient(&self, y: &[f64], n: usize) -> Result<Vec<f64>> {
        self.check_parameters(y)?;
        let h = 1.0 / n as f64;
        let tables: Vec<(Vec<f64>, Vec<f64>)> = (1..=self.parameters)
            .map(|m| {
                let (wh, wc) = Self::frequencies(m);
                let a = self.amplitude(m) * y[m - 1];
                let s1 = (0..=n).map(|i| a * (wh * i as f64 * h).sin()).collect();
                let s2 = (0..=n).map(|j| (wc * j as f64 * h).sin()).collect();
                (s1, s2)
            })
            .collect();
        let mut out = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                let s: f64 = tables.iter().map(|(s1, s2)| s1[i] * s2[j]).sum();
                out.push(self.link(s));
            }
        }
        Ok(out)
    }

    /// Lower bound `1 - (6/π²) Σ_{m ≤ M} m⁻²` of the affine coefficient on `[-1, 1]^M`.
    pub fn affine_ellipticity_bound(parameters: usize) -> f64 {
        1.0 - 6.0 / (PI * PI) * (1..=parameters).map(|m| 1.0 / (m * m) as f64).sum::<f64>()
    }
}

pub fn harmonic_number(m: usize) -> f64 {
    (1..=m).map(|k| 1.0 / k as f64).sum()
}

/// Nodal values on the `(n + 1) x (n + 1)` grid of `[0, 1]²`, boundary included.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    n: usize,
    values: Vec<f64>,
    /// Conjugate-gradient iterations spent on the solve.
    pub iterations: usize,
}

impl Field {
    pub fn zeros(n: usize) -> Self {
        Self { n, values: vec![0.0; (n + 1) * (n + 1)], iterations: 0 }
    }

    /// Intervals per side.
    pub fn grid(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    /// Value at node `(i, j)`, i.e. `x = (i h, j h)`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.n + 1) + i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn from_fn(n: usize, f: impl Fn(f64, f64) -> f64) -> Self {
        let h = 1.0 / n as f64;
        let values =
            (0..=n).flat_map(|j| (0..=n).map(move |i| (i, j))).map(|(i, j)| f(i as f64 * h, j as f64 * h)).collect();
        Self { n, values, iterations: 0 }
    }

    /// Discrete L² distance `sqrt(h² Σ |u - g|²)` to `g` over all nodes.
    pub fn l2_distance(&self, g: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.h();
        let mut acc = 0.0;
        for j in 0..=self.n {
            for i in 0..=self.n {
                acc += (self.at(i, j) - g(i as f64 * h, j as f64 * h)).powi(2);
            }
        }
        (acc * h * h).sqrt()
    }
}

/// Composite trapezoidal rule for `∫_D u dx` on the field's grid.
pub fn qoi(field: &Field) -> f64 {
    let n = field.n;
    let h = field.h();
    let edge = |k: usize| if k == 0 || k == n { 0.5 } else { 1.0 };
    let mut acc = 0.0;
    for j in 0..=n {
        for i in 0..=n {
            acc += edge(i) * edge(j) * field.at(i, j);
        }
    }
    acc * h * h
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Solves `-div(a grad w) = f`, `w = 0` on the boundary, on a uniform grid with `n`
/// intervals per side. `a` is sampled at the nodes and averaged harmonically onto the
/// cell faces; the system is solved by Jacobi-preconditioned conjugate gradients.
pub fn solve_fd(n: usize, a_nodes: &[f64], f: impl Fn(f64, f64) -> f64) -> Result<Field> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("grid needs at least 2 intervals, got {n}")));
    }
    let stride = n + 1;
    if a_nodes.len() != stride * stride {
        return Err(Error::DimensionMismatch(format!("{} nodal coefficients for a {n}x{n} grid", a_nodes.len())));
    }
    if let Some(&bad) = a_nodes.iter().find(|&&a| !(a > 0.0 && a.is_finite())) {
        return Err(Error::NonPositiveCoefficient(bad));
    }
    let h = 1.0 / n as f64;
    let inner = n - 1;
    let node = |i: usize, j: usize| a_nodes[j * stride + i];
    // Face coefficients per unknown: east, west, north, south.
    let idx = |i: usize, j: usize| (j - 1) * inner + (i - 1);
    let mut faces = vec![[0.0; 4]; inner * inner];
    let mut diag = vec![0.0; inner * inner];
    let mut rhs = vec![0.0; inner * inner];
    for j in 1..n {
        for i in 1..n {
            let c = node(i, j);
            let k = idx(i, j);
            faces[k] = [
                harmonic_mean(c, node(i + 1, j)),
                harmonic_mean(c, node(i - 1, j)),
                harmonic_mean(c, node(i, j + 1)),
                harmonic_mean(c, node(i, j - 1)),
            ];
            diag[k] = faces[k].iter().sum::<f64>();
            rhs[k] = h * h * f(i as f64 * h, j as f64 * h);
        }
    }
    let apply = |u: &[f64], out: &mut [f64]| {
        for j in 1..n {
            for i in 1..n {
                let k = idx(i, j);
                let [e, w, no, s] = faces[k];
                let mut v = diag[k] * u[k];
                if i + 1 < n {
                    v -= e * u[k + 1];
                }
                if i > 1 {
                    v -= w * u[k - 1];
                }
                if j + 1 < n {
                    v -= no * u[k + inner];
                }
                if j > 1 {
                    v -= s * u[k - inner];
                }
                out[k] = v;
            }
        }
    };
    let (u, iterations) = conjugate_gradient(apply, &diag, &rhs, CG_TOLERANCE, 10 * inner * inner + 100)?;
    let mut field = Field::zeros(n);
    field.iterations = iterations;
    for j in 1..n {
        for i in 1..n {
            field.values[j * stride + i] = u[idx(i, j)];
        }
    }
    Ok(field)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let len = b.len();
    let b_norm = dot(b, b).sqrt();
    let mut x = vec![0.0; len];
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; len];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..len {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        let res = dot(&r, &r).sqrt();
        if res <= tol * b_norm {
            return Ok((x, it));
        }
        for k in 0..len {
            z[k] = r[k] / diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::NotConverged { iterations: max_iter, residual: dot(&r, &r).sqrt() / b_norm })
}

/// Solution for parameter `y` with source `f ≡ 1`.
pub fn solve_diffusion(model: &DiffusionModel, y: &[f64], n: usize) -> Result<Field> {
    if n < MIN_GRID {
        return Err(Error::InvalidArgument(format!("grid {n} is below the minimum {MIN_GRID}")));
    }
    solve_fd(n, &model.nodal_coefficient(y, n)?, |_, _| 1.0)
}

/// One evaluation of the quantity of interest `U(y) = ∫_D w(x, y) dx`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QoiSample {
    pub y: Vec<f64>,
    pub value: f64,
    pub grid: usize,
}

pub fn qoi_sample(model: &DiffusionModel, y: Vec<f64>, n: usize) -> Result<QoiSample> {
    let value = qoi(&solve_diffusion(model, &y, n)?);
    Ok(QoiSample { y, value, grid: n })
}

/// Series value of `∫ w` for `-Δw = 1` on the unit square:
/// `Σ_{j, k odd} 64 / (π⁶ j² k² (j² + k²))`, truncated at `j, k < 2 * terms`.
pub fn poisson_qoi_series(terms: usize) -> f64 {
    let mut acc = 0.0;
    for j in (1..2 * terms).step_by(2) {
        for k in (1..2 * terms).step_by(2) {
            let (j, k) = (j as f64, k as f64);
            acc += 64.0 / (PI.powi(6) * j * j * k * k * (j * j + k * k));
        }
    }
    acc
}

/// Point value of the series solution of `-Δw = 1` on the unit square.
pub fn poisson_series(x1: f64, x2: f64, terms: usize) -> f64 {
    let mut acc = 0.0;
    for j in (1..2 * terms).step_by(2) {
        for k in (1..2 * terms).step_by(2) {
            let (jf, kf) = (j as f64, k as f64);
            acc += 16.0 / (PI.powi(4) * jf * kf * (jf * jf + kf * kf)) * (jf * PI * x1).sin() * (kf * PI * x2).sin();
        }
    }
    acc
}

/// Draws `count` parameters sequentially from a seeded stream and solves for their
/// quantities of interest in parallel. Weights are 1.
pub fn generate_samples(
    model: &DiffusionModel,
    count: usize,
    sampling: Sampling,
    seed: u64,
    n: usize,
) -> Result<SampleSet> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ys: Vec<Vec<f64>> = (0..count).map(|_| sampling.draw(model.parameters, &mut rng)).collect();
    let values = ys.par_iter().map(|y| Ok(qoi(&solve_diffusion(model, y, n)?))).collect::<Result<Vec<f64>>>()?;
    SampleSet::new(ys, values, None)
}
