//! Variation functions `𝔎_A(y) = sup_{a ∈ A, ||a|| = 1} |a(y)|²` on point grids.
//!
//! For a linear span with L²-orthonormal basis `P_1..P_d` the variation function is
//! `Σ_j P_j(y)²`; for a general basis with L² Gram `G` it is `b(y)ᵀ G⁻¹ b(y)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bases::UnivariateBasis;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::quadrature::Quadrature;
use crate::tensor::{fixed_interface, InterfaceStacks, TensorTrain};

/// Points in `Y ⊆ R^dim` with probability quadrature weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGrid {
    dim: usize,
    points: Vec<f64>,
    quad_weights: Vec<f64>,
}

impl PointGrid {
    pub fn new(dim: usize, points: Vec<f64>, quad_weights: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() != dim * quad_weights.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coordinates for {} points of dimension {dim}",
                points.len(),
                quad_weights.len()
            )));
        }
        if quad_weights.iter().any(|&q| !(q >= 0.0)) {
            return Err(Error::InvalidArgument("quadrature weights must be non-negative".into()));
        }
        Ok(Self { dim, points, quad_weights })
    }

    /// `n` equispaced points on `[a, b]` including the endpoints, with trapezoid weights
    /// for the uniform probability measure.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) {
            return Err(Error::InvalidArgument(format!("uniform grid needs n >= 2 and a < b, got n={n}, [{a}, {b}]")));
        }
        let h = (b - a) / (n - 1) as f64;
        let points = (0..n).map(|i| if i == n - 1 { b } else { a + h * i as f64 }).collect();
        let inner = 1.0 / (n - 1) as f64;
        let quad_weights = (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * inner } else { inner }).collect();
        Self::new(1, points, quad_weights)
    }

    pub fn from_quadrature(q: &Quadrature) -> Self {
        Self { dim: 1, points: q.nodes.clone(), quad_weights: q.weights.clone() }
    }

    /// Unstructured sample cloud with equal weights.
    pub fn cloud(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::DimensionMismatch("points of differing dimension".into()));
        }
        let n = points.len();
        Self::new(dim, points.concat(), vec![1.0 / n as f64; n])
    }

    /// Cartesian product; the last factor varies fastest.
    pub fn tensor(factors: &[PointGrid]) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::DimensionMismatch("tensor grid of zero factors".into()));
        }
        let mut grid = factors[0].clone();
        for f in &factors[1..] {
            let dim = grid.dim + f.dim;
            let mut points = Vec::with_capacity(grid.len() * f.len() * dim);
            let mut quad_weights = Vec::with_capacity(grid.len() * f.len());
            for i in 0..grid.len() {
                for j in 0..f.len() {
                    points.extend_from_slice(grid.point(i));
                    points.extend_from_slice(f.point(j));
                    quad_weights.push(grid.quad_weights[i] * f.quad_weights[j]);
                }
            }
            grid = Self { dim, points, quad_weights };
        }
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.quad_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quad_weights.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn quad_weights(&self) -> &[f64] {
        &self.quad_weights
    }
}

/// Tabulated variation function with a sampling weight per point.
#[derive(Debug, Clone, PartialEq)]
pub struct VariationGrid {
    grid: PointGrid,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl VariationGrid {
    pub fn new(grid: PointGrid, values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || weights.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} values and {} weights on a grid of {} points",
                values.len(),
                weights.len(),
                grid.len()
            )));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::InvalidArgument("variation values must be non-negative".into()));
        }
        Ok(Self { grid, values, weights })
    }

    fn unweighted(grid: PointGrid, values: Vec<f64>) -> Self {
        let n = grid.len();
        Self { grid, values, weights: vec![1.0; n] }
    }

    pub fn grid(&self) -> &PointGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} weights for {} points",
                weights.len(),
                self.values.len()
            )));
        }
        self.weights = weights;
        Ok(self)
    }

    /// `max_y 𝔎(y)` over the grid.
    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// Index of the first grid point attaining the sup.
    pub fn argmax(&self) -> usize {
        let s = self.sup();
        self.values.iter().position(|&v| v == s).unwrap_or(0)
    }

    /// `max_y w(y) 𝔎(y)`.
    pub fn weighted_sup(&self) -> f64 {
        self.values.iter().zip(&self.weights).map(|(k, w)| k * w).fold(0.0, f64::max)
    }

    /// Quadrature approximation of `∫ 𝔎 dρ`.
    pub fn l1_norm(&self) -> f64 {
        self.values.iter().zip(&self.grid.quad_weights).map(|(k, q)| k * q).sum()
    }
}

/// `𝔎` of the span of an L²-orthonormal system, given its evaluations
/// (`evals[(i, j)] = P_j(y_i)`) at the grid points.
pub fn variation_of_span(evals: &DMatrix<f64>, grid: &PointGrid) -> Result<VariationGrid> {
    check_evals(evals, grid)?;
    let values = evals.row_iter().map(|r| r.norm_squared()).collect();
    Ok(VariationGrid::unweighted(grid.clone(), values))
}

/// `𝔎` of the span of an arbitrary system with L² Gram matrix `gram`.
pub fn variation_of_span_with_gram(
    evals: &DMatrix<f64>,
    gram: &DMatrix<f64>,
    grid: &PointGrid,
) -> Result<VariationGrid> {
    check_evals(evals, grid)?;
    if gram.shape() != (evals.ncols(), evals.ncols()) {
        return Err(Error::DimensionMismatch(format!("gram {:?} for {} functions", gram.shape(), evals.ncols())));
    }
    let pinv = pinv_sym(gram);
    let values = evals
        .row_iter()
        .map(|r| {
            let b = r.transpose();
            b.dot(&(&pinv * &b)).max(0.0)
        })
        .collect();
    Ok(VariationGrid::unweighted(grid.clone(), values))
}

fn check_evals(evals: &DMatrix<f64>, grid: &PointGrid) -> Result<()> {
    if evals.ncols() == 0 {
        return Err(Error::EmptyBasis);
    }
    if evals.nrows() != grid.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} evaluation rows for {} grid points",
            evals.nrows(),
            grid.len()
        )));
    }
    Ok(())
}

/// `𝔎` of the span of a univariate basis on a one-dimensional grid.
pub fn variation_of_basis(basis: &UnivariateBasis, grid: &PointGrid) -> Result<VariationGrid> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch(format!("univariate basis on a grid of dimension {}", grid.dim())));
    }
    let evals = basis_evals(basis, grid);
    if basis.is_l2_orthonormal() {
        variation_of_span(&evals, grid)
    } else {
        variation_of_span_with_gram(&evals, &basis.l2_gram(basis.default_quadrature_order()), grid)
    }
}

fn basis_evals(basis: &UnivariateBasis, grid: &PointGrid) -> DMatrix<f64> {
    let d = basis.dim();
    let mut evals = DMatrix::zeros(grid.len(), d);
    for i in 0..grid.len() {
        for (j, v) in basis.evaluate(grid.point(i)[0]).into_iter().enumerate() {
            evals[(i, j)] = v;
        }
    }
    evals
}

/// Moore–Penrose inverse of a symmetric positive semidefinite matrix.
fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (vals, vecs) = sym_eigen(m);
    let smax = vals.last().copied().unwrap_or(0.0);
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for (k, &s) in vals.iter().enumerate() {
        if s > 1e-12 * smax {
            let v = vecs.column(k);
            out += v * v.transpose() / s;
        }
    }
    out
}

fn aligned(ka: &VariationGrid, kb: &VariationGrid) -> Result<Vec<f64>> {
    if ka.grid != kb.grid {
        return Err(Error::GridMismatch(format!(
            "grids of {} and {} points (dimension {} and {}) differ",
            ka.grid.len(),
            kb.grid.len(),
            ka.grid.dim,
            kb.grid.dim
        )));
    }
    Ok(if ka.weights == kb.weights { ka.weights.clone() } else { vec![1.0; ka.values.len()] })
}

fn combine(ka: &VariationGrid, kb: &VariationGrid, op: impl Fn(f64, f64) -> f64) -> Result<VariationGrid> {
    let weights = aligned(ka, kb)?;
    let values = ka.values.iter().zip(&kb.values).map(|(&a, &b)| op(a, b)).collect();
    Ok(VariationGrid { grid: ka.grid.clone(), values, weights })
}

/// Pointwise product: `𝔎_{A⊗B}` when both are tabulated on the same product grid.
pub fn variation_product(ka: &VariationGrid, kb: &VariationGrid) -> Result<VariationGrid> {
    combine(ka, kb, |a, b| a * b)
}

/// Pointwise sum: `𝔎_{A⊕B}` for L²-orthogonal spans.
pub fn variation_sum(ka: &VariationGrid, kb: &VariationGrid) -> Result<VariationGrid> {
    combine(ka, kb, |a, b| a + b)
}

/// Pointwise maximum: `𝔎_{A∪B}`.
pub fn variation_union(ka: &VariationGrid, kb: &VariationGrid) -> Result<VariationGrid> {
    combine(ka, kb, f64::max)
}

/// `𝔎_{A⊗B}` on the Cartesian product of the two grids (`kb`'s grid varies fastest).
pub fn variation_tensor(ka: &VariationGrid, kb: &VariationGrid) -> Result<VariationGrid> {
    let grid = PointGrid::tensor(&[ka.grid.clone(), kb.grid.clone()])?;
    let outer = |x: &[f64], y: &[f64]| x.iter().flat_map(|&a| y.iter().map(move |&b| a * b)).collect::<Vec<_>>();
    Ok(VariationGrid { grid, values: outer(&ka.values, &kb.values), weights: outer(&ka.weights, &kb.weights) })
}

/// The variance-optimal weight `w = ||𝔎||_{L¹} / 𝔎` on the grid.
pub fn optimal_weight(k: &VariationGrid) -> Result<Vec<f64>> {
    if let Some(i) = k.values.iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroVariation(i));
    }
    let l1 = k.l1_norm();
    Ok(k.values.iter().map(|&v| l1 / v).collect())
}

/// Grid estimate of the local variation constant of rank-1 `d1 × d2` matrices at the
/// all-ones matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalVariationEstimate {
    pub d1: usize,
    pub d2: usize,
    pub r: f64,
    pub m: usize,
    pub estimate: f64,
    pub alphas: Vec<f64>,
    /// `table[j][k]` for `alphas[j]` and the `k`-th β of that row; `None` where the
    /// feasible γ set is empty.
    pub table: Vec<Vec<Option<f64>>>,
}

impl LocalVariationEstimate {
    /// β grid of row `j`: `m` equispaced values in `[1 - |1-α_j|, 1 + |1-α_j|]`.
    pub fn betas(&self, j: usize) -> Vec<f64> {
        beta_grid(self.alphas[j], self.m)
    }
}

fn linspace(a: f64, b: f64, m: usize) -> Vec<f64> {
    (0..m).map(|k| if k == m - 1 { b } else { a + (b - a) * k as f64 / (m - 1) as f64 }).collect()
}

fn beta_grid(alpha: f64, m: usize) -> Vec<f64> {
    let t = (1.0 - alpha).abs();
    linspace(1.0 - t, 1.0 + t, m)
}

/// `||𝟙 - M_{α,β,γ}||²_Fro` summed over the four entry classes of the structured matrix.
pub fn structured_residual(d1: usize, d2: usize, alpha: f64, beta: f64, gamma: f64) -> f64 {
    let (e1, e2) = ((d1 - 1) as f64, (d2 - 1) as f64);
    (1.0 - alpha).powi(2)
        + e2 * (1.0 - alpha * gamma).powi(2)
        + e1 * (1.0 - beta).powi(2)
        + e1 * e2 * (1.0 - beta * gamma).powi(2)
}

/// `{γ : |1 - cγ| ≤ t}` as a closed interval.
fn feasible(c: f64, t: f64) -> Option<(f64, f64)> {
    if c == 0.0 {
        return (t >= 1.0).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let (a, b) = ((1.0 - t) / c, (1.0 + t) / c);
    Some((a.min(b), a.max(b)))
}

/// One table cell: `sup_γ d1 d2 (1-α)² / ||𝟙 - M_{α,β,γ}||²_Fro` over the γ for which
/// the largest entry of `𝟙 - M` is the corner entry.
pub fn local_variation_cell(d1: usize, d2: usize, alpha: f64, beta: f64) -> Option<f64> {
    let t = (1.0 - alpha).abs();
    if t == 0.0 || (1.0 - beta).abs() > t {
        return None;
    }
    let (a_lo, a_hi) = feasible(alpha, t)?;
    let (b_lo, b_hi) = feasible(beta, t)?;
    let (lo, hi) = (a_lo.max(b_lo), a_hi.min(b_hi));
    if lo > hi {
        return None;
    }
    let e1 = (d1 - 1) as f64;
    let curvature = alpha * alpha + e1 * beta * beta;
    let gamma = if curvature > 0.0 { (alpha + e1 * beta) / curvature } else { 0.0 };
    let gamma = gamma.clamp(lo, hi);
    let gamma = if gamma.is_finite() { gamma } else { 0.0 };
    Some((d1 * d2) as f64 * t * t / structured_residual(d1, d2, alpha, beta, gamma))
}

/// Estimates the local variation constant of rank-1 matrices at radius `r` on an
/// `m × m` (α, β) grid.
pub fn local_variation_rank1(d1: usize, d2: usize, r: f64, m: usize) -> Result<LocalVariationEstimate> {
    if d1 < 2 || d2 < 2 || !(r > 0.0) || !r.is_finite() || m < 3 {
        return Err(Error::InvalidArgument(format!(
            "local variation needs d1, d2 >= 2, finite r > 0, m >= 3 (got {d1}, {d2}, {r}, {m})"
        )));
    }
    let alphas = linspace(1.0 - r, 1.0 + r, m);
    let table: Vec<Vec<Option<f64>>> = alphas
        .par_iter()
        .map(|&alpha| beta_grid(alpha, m).into_iter().map(|beta| local_variation_cell(d1, d2, alpha, beta)).collect())
        .collect();
    let estimate = table.iter().flatten().flatten().copied().fold(0.0, f64::max);
    Ok(LocalVariationEstimate { d1, d2, r, m, estimate, alphas, table })
}

struct LocalFactors {
    stacks: InterfaceStacks,
    left_pinv: DMatrix<f64>,
    left_log: f64,
    right_pinv: DMatrix<f64>,
    right_log: f64,
    basis_pinv: DMatrix<f64>,
}

impl LocalFactors {
    fn new(tt: &TensorTrain, m: usize, basis: &UnivariateBasis) -> Result<Self> {
        let dims = tt.dims();
        if dims.iter().any(|&d| d != basis.dim()) {
            return Err(Error::DimensionMismatch(format!("train dims {dims:?} vs basis dimension {}", basis.dim())));
        }
        let stacks = fixed_interface(tt, m)?;
        let g = basis.l2_gram(basis.default_quadrature_order());
        let (left, left_log) = stacks.left_gram(&g);
        let (right, right_log) = stacks.right_gram(&g);
        Ok(Self {
            left_pinv: pinv_sym(&left),
            left_log,
            right_pinv: pinv_sym(&right),
            right_log,
            basis_pinv: pinv_sym(&g),
            stacks,
        })
    }

    fn quad(pinv: &DMatrix<f64>, v: &[f64]) -> f64 {
        let v = nalgebra::DVector::from_column_slice(v);
        v.dot(&(pinv * &v)).max(0.0)
    }

    fn left(&self, sample: &[&[f64]]) -> f64 {
        Self::quad(&self.left_pinv, &self.stacks.left_vector(sample)) * (-self.left_log).exp()
    }

    fn right(&self, sample: &[&[f64]]) -> f64 {
        Self::quad(&self.right_pinv, &self.stacks.right_vector(sample)) * (-self.right_log).exp()
    }

    fn middle(&self, b: &[f64]) -> f64 {
        Self::quad(&self.basis_pinv, b)
    }
}

/// `𝔎` of the local model space `𝒱_{V̂_m}` at the points of an `M`-dimensional grid.
///
/// The local basis `l(y) ⊗ b(y_m) ⊗ r(y)` factorizes, so its variation function is the
/// product of the three whitened quadratic forms.
pub fn microstep_variation(
    tt: &TensorTrain,
    m: usize,
    basis: &UnivariateBasis,
    grid: &PointGrid,
) -> Result<VariationGrid> {
    if grid.dim() != tt.order() {
        return Err(Error::DimensionMismatch(format!(
            "grid dimension {} for a train of order {}",
            grid.dim(),
            tt.order()
        )));
    }
    let f = LocalFactors::new(tt, m, basis)?;
    let values = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let evals: Vec<Vec<f64>> = grid.point(i).iter().map(|&y| basis.evaluate(y)).collect();
            let sample: Vec<&[f64]> = evals.iter().map(Vec::as_slice).collect();
            f.left(&sample) * f.middle(sample[m]) * f.right(&sample)
        })
        .collect();
    Ok(VariationGrid::unweighted(grid.clone(), values))
}

/// Exact maximum of the local variation function over the tensor grid `axis^M`.
///
/// The three factors depend on disjoint coordinates and are maximized separately. Rank-1
/// interfaces factor further per mode; otherwise the interface grid is enumerated, up to
/// `cap` points per side.
pub fn microstep_variation_sup(
    tt: &TensorTrain,
    m: usize,
    basis: &UnivariateBasis,
    axis: &[f64],
    cap: usize,
) -> Result<f64> {
    if axis.is_empty() {
        return Err(Error::InvalidArgument("empty axis grid".into()));
    }
    let f = LocalFactors::new(tt, m, basis)?;
    let evals: Vec<Vec<f64>> = axis.iter().map(|&y| basis.evaluate(y)).collect();
    let order = tt.order();
    let middle = evals.iter().map(|b| f.middle(b)).fold(0.0, f64::max);
    let side_sup = |modes: Vec<usize>, eval: &(dyn Fn(&[&[f64]]) -> f64 + Sync)| -> Result<f64> {
        let comps = tt.components();
        if modes.iter().all(|&k| comps[k].left_rank() == 1 && comps[k].right_rank() == 1) {
            // scalar interface: maximize each mode's factor on its own
            let mut sample: Vec<&[f64]> = vec![&evals[0]; order];
            let base = eval(&sample);
            let mut total = base;
            for &k in &modes {
                let mut best = 0.0f64;
                for e in &evals {
                    sample[k] = e;
                    best = best.max(eval(&sample));
                }
                sample[k] = &evals[0];
                if base > 0.0 {
                    total *= best / base;
                } else {
                    return enumerate(&modes, &evals, order, cap, eval);
                }
            }
            return Ok(total);
        }
        enumerate(&modes, &evals, order, cap, eval)
    };
    let left = side_sup((0..m).collect(), &|s| f.left(s))?;
    let right = side_sup((m + 1..order).collect(), &|s| f.right(s))?;
    Ok(left * middle * right)
}

fn enumerate(
    modes: &[usize],
    evals: &[Vec<f64>],
    order: usize,
    cap: usize,
    eval: &(dyn Fn(&[&[f64]]) -> f64 + Sync),
) -> Result<f64> {
    let n = evals.len();
    let total = (0..modes.len()).try_fold(1usize, |acc, _| acc.checked_mul(n));
    let total = match total {
        Some(t) if t <= cap => t,
        _ => return Err(Error::TooLarge { entries: total.unwrap_or(usize::MAX), cap }),
    };
    Ok((0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut sample: Vec<&[f64]> = vec![&evals[0]; order];
            for &k in modes.iter().rev() {
                sample[k] = &evals[idx % n];
                idx /= n;
            }
            eval(&sample)
        })
        .reduce(|| 0.0, f64::max))
}
