//! Univariate orthonormal polynomial bases, RKHS Gramians on their span, and
//! orthonormalization of a basis with respect to such a Gramian.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::sym_eigen;
use crate::quadrature::{gauss_hermite, gauss_legendre, Quadrature};
use crate::tensor::ModeValues;

/// Reference probability measure of a basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// `dx / 2` on `[-1, 1]`.
    Uniform,
    /// Standard normal density on the real line.
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Legendre,
    Hermite,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Legendre => "legendre",
            Family::Hermite => "hermite",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "legendre" => Ok(Family::Legendre),
            "hermite" => Ok(Family::Hermite),
            other => {
                Err(Error::UnknownStrategy { kind: "basis", name: other.into(), available: "legendre, hermite".into() })
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `d` polynomial basis functions. The raw functions are the L²-orthonormal polynomials
/// of the family (positive leading coefficient); an optional transform `T` replaces
/// them by `b'_k = sum_j T[j, k] b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateBasis {
    family: Family,
    dim: usize,
    transform: Option<DMatrix<f64>>,
    sup_norms: Option<Vec<f64>>,
}

impl UnivariateBasis {
    /// Normalized Legendre polynomials `L_k = sqrt(2k + 1) P_k` on `[-1, 1]`.
    pub fn legendre(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyBasis);
        }
        // |L_k| is maximal at the endpoints
        let sup = (0..d).map(|k| ((2 * k + 1) as f64).sqrt()).collect();
        Ok(Self { family: Family::Legendre, dim: d, transform: None, sup_norms: Some(sup) })
    }

    /// Probabilists' Hermite polynomials normalized in L²(N(0, 1)): `He_k / sqrt(k!)`.
    pub fn hermite(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptyBasis);
        }
        Ok(Self { family: Family::Hermite, dim: d, transform: None, sup_norms: None })
    }

    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        match Family::from_name(name)? {
            Family::Legendre => Self::legendre(d),
            Family::Hermite => Self::hermite(d),
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn measure(&self) -> Measure {
        match self.family {
            Family::Legendre => Measure::Uniform,
            Family::Hermite => Measure::StandardNormal,
        }
    }

    pub fn domain(&self) -> (f64, f64) {
        match self.family {
            Family::Legendre => (-1.0, 1.0),
            Family::Hermite => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Coefficients of the current functions in the raw orthonormal basis, if transformed.
    pub fn transform(&self) -> Option<&DMatrix<f64>> {
        self.transform.as_ref()
    }

    /// Whether the functions are orthonormal in L² of the reference measure.
    pub fn is_l2_orthonormal(&self) -> bool {
        match &self.transform {
            None => true,
            Some(t) => (t.transpose() * t - DMatrix::identity(self.dim, self.dim)).amax() < 1e-12,
        }
    }

    /// `||b_k||_inf` per function, `None` when unbounded on the domain.
    pub fn sup_norms(&self) -> Option<&[f64]> {
        self.sup_norms.as_deref()
    }

    fn raw_values(&self, x: f64) -> Vec<f64> {
        let d = self.dim;
        let mut p = vec![0.0; d];
        match self.family {
            Family::Legendre => {
                p[0] = 1.0;
                if d > 1 {
                    p[1] = x;
                }
                for k in 1..d.saturating_sub(1) {
                    let kf = k as f64;
                    p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
                }
                for (k, v) in p.iter_mut().enumerate() {
                    *v *= ((2 * k + 1) as f64).sqrt();
                }
            }
            Family::Hermite => {
                p[0] = 1.0;
                if d > 1 {
                    p[1] = x;
                }
                for k in 1..d.saturating_sub(1) {
                    p[k + 1] = x * p[k] - k as f64 * p[k - 1];
                }
                let mut fact = 1.0;
                for (k, v) in p.iter_mut().enumerate() {
                    if k > 0 {
                        fact *= k as f64;
                    }
                    *v /= fact.sqrt();
                }
            }
        }
        p
    }

    fn raw_derivatives(&self, x: f64) -> Vec<f64> {
        let d = self.dim;
        let mut dp = vec![0.0; d];
        match self.family {
            Family::Legendre => {
                // unnormalized P_k and P'_{k+1} = P'_{k-1} + (2k + 1) P_k
                let mut p = vec![0.0; d];
                p[0] = 1.0;
                if d > 1 {
                    p[1] = x;
                    dp[1] = 1.0;
                }
                for k in 1..d.saturating_sub(1) {
                    let kf = k as f64;
                    p[k + 1] = ((2.0 * kf + 1.0) * x * p[k] - kf * p[k - 1]) / (kf + 1.0);
                    dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
                }
                for (k, v) in dp.iter_mut().enumerate() {
                    *v *= ((2 * k + 1) as f64).sqrt();
                }
            }
            Family::Hermite => {
                // He'_k = k He_{k-1}, so h'_k = sqrt(k) h_{k-1}
                let h = self.raw_values(x);
                for k in 1..d {
                    dp[k] = (k as f64).sqrt() * h[k - 1];
                }
            }
        }
        dp
    }

    fn apply_transform(&self, raw: Vec<f64>) -> Vec<f64> {
        match &self.transform {
            None => raw,
            Some(t) => (0..self.dim).map(|k| (0..self.dim).map(|j| t[(j, k)] * raw[j]).sum()).collect(),
        }
    }

    /// Values `(b_1(x), ..., b_d(x))`.
    pub fn evaluate(&self, x: f64) -> Vec<f64> {
        self.apply_transform(self.raw_values(x))
    }

    /// Derivatives `(b_1'(x), ..., b_d'(x))`.
    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        self.apply_transform(self.raw_derivatives(x))
    }

    /// Evaluations at many points as an `n x d` table.
    pub fn evaluate_points(&self, xs: &[f64]) -> ModeValues {
        let data = xs.iter().flat_map(|&x| self.evaluate(x)).collect();
        ModeValues::new(xs.len(), self.dim, data).expect("consistent sizes")
    }

    /// Gauss rule with `n` nodes for the basis' reference measure.
    pub fn quadrature(&self, n: usize) -> Quadrature {
        match self.measure() {
            Measure::Uniform => gauss_legendre(n),
            Measure::StandardNormal => gauss_hermite(n),
        }
    }

    /// Default number of quadrature nodes, `4 d`.
    pub fn default_quadrature_order(&self) -> usize {
        4 * self.dim
    }

    /// L² Gram matrix of the current functions under an `n`-node Gauss rule.
    pub fn l2_gram(&self, n: usize) -> DMatrix<f64> {
        let q = self.quadrature(n);
        let mut g = DMatrix::zeros(self.dim, self.dim);
        for (&x, &w) in q.nodes.iter().zip(&q.weights) {
            let b = self.evaluate(x);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    g[(i, j)] += w * b[i] * b[j];
                }
            }
        }
        g
    }

    /// Returns the basis with transform `t` applied on top of the current one.
    fn transformed(&self, t: &DMatrix<f64>) -> Self {
        let total = match &self.transform {
            None => t.clone(),
            Some(t0) => t0 * t,
        };
        let sup_norms = match (&self.sup_norms, is_diagonal(t)) {
            (Some(s), true) => Some(s.iter().enumerate().map(|(k, v)| v * t[(k, k)].abs()).collect()),
            (Some(_), false) => Some(grid_sup_norms(self.family, self.dim, &total)),
            (None, _) => None,
        };
        Self { family: self.family, dim: self.dim, transform: Some(total), sup_norms }
    }
}

fn is_diagonal(t: &DMatrix<f64>) -> bool {
    t.iter().enumerate().all(|(idx, &v)| idx % t.nrows() == idx / t.nrows() || v == 0.0)
}

fn grid_sup_norms(family: Family, dim: usize, t: &DMatrix<f64>) -> Vec<f64> {
    let raw = UnivariateBasis { family, dim, transform: Some(t.clone()), sup_norms: None };
    let n = 8001;
    let mut sup = vec![0.0f64; dim];
    for i in 0..n {
        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        for (s, v) in sup.iter_mut().zip(raw.evaluate(x)) {
            *s = s.max(v.abs());
        }
    }
    sup
}

/// Symmetric positive definite Gram matrix of an inner product on a basis' span.
#[derive(Debug, Clone, PartialEq)]
pub struct Gramian {
    matrix: DMatrix<f64>,
    tag: String,
}

impl Gramian {
    pub fn new(matrix: DMatrix<f64>, tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::NotPositiveDefinite(format!("{tag}: not a square matrix")));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(Error::NotPositiveDefinite(format!("{tag}: not symmetric")));
        }
        let (vals, _) = sym_eigen(&matrix);
        if matrix.clone().cholesky().is_none() || vals[0] <= 1e-12 * vals[vals.len() - 1] {
            return Err(Error::NotPositiveDefinite(format!("{tag}: smallest eigenvalue {:e}", vals[0])));
        }
        Ok(Self { matrix, tag })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d, d), tag: "identity".into() }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// A rule producing an RKHS Gramian for a univariate basis.
pub trait GramianRule: Send + Sync {
    fn name(&self) -> &'static str;
    fn gramian(&self, basis: &UnivariateBasis) -> Result<Gramian>;
}

/// `diag(||b_1||²_inf, ..., ||b_d||²_inf)`; the induced norm bounds point values via
/// `|v(x)|² <= d * v^T G v`.
#[derive(Debug, Clone, Copy, Default)]
pub struct DiagSup;

impl GramianRule for DiagSup {
    fn name(&self) -> &'static str {
        "diag_sup"
    }

    fn gramian(&self, basis: &UnivariateBasis) -> Result<Gramian> {
        diag_sup_gramian(basis)
    }
}

/// Sobolev `H¹(ρ)` inner product `∫ (u v + u' v') dρ`.
#[derive(Debug, Clone, Copy, Default)]
pub struct H1 {
    /// Quadrature nodes; `None` uses the basis default.
    pub quadrature_order: Option<usize>,
}

impl GramianRule for H1 {
    fn name(&self) -> &'static str {
        "h1"
    }

    fn gramian(&self, basis: &UnivariateBasis) -> Result<Gramian> {
        h1_gramian(basis, self.quadrature_order.unwrap_or_else(|| basis.default_quadrature_order()))
    }
}

/// Names accepted by [`gramian_rule`].
pub const GRAMIAN_RULES: &[&str] = &["diag_sup", "h1"];

/// Looks up a Gramian rule by its configuration name.
pub fn gramian_rule(name: &str) -> Result<Box<dyn GramianRule>> {
    match name {
        "diag_sup" => Ok(Box::new(DiagSup)),
        "h1" => Ok(Box::new(H1::default())),
        other => {
            Err(Error::UnknownStrategy { kind: "gramian", name: other.into(), available: GRAMIAN_RULES.join(", ") })
        }
    }
}

pub fn diag_sup_gramian(basis: &UnivariateBasis) -> Result<Gramian> {
    let sup = basis.sup_norms().ok_or_else(|| Error::InfiniteSupNorm(basis.family().name().into()))?;
    let diag = nalgebra::DVector::from_iterator(sup.len(), sup.iter().map(|s| s * s));
    Gramian::new(DMatrix::from_diagonal(&diag), "diag_sup")
}

/// Embedding constant `C` of the diagonal sup-norm Gramian: `||v||_inf <= C ||v||_G`.
pub fn diag_sup_embedding_constant(basis: &UnivariateBasis) -> f64 {
    (basis.dim() as f64).sqrt()
}

pub fn h1_gramian(basis: &UnivariateBasis, quadrature_order: usize) -> Result<Gramian> {
    let d = basis.dim();
    if quadrature_order < d {
        return Err(Error::NotPositiveDefinite(format!(
            "h1: {quadrature_order} quadrature nodes cannot resolve {d} basis functions"
        )));
    }
    let q = basis.quadrature(quadrature_order);
    let mut g = DMatrix::zeros(d, d);
    for (&x, &w) in q.nodes.iter().zip(&q.weights) {
        let b = basis.evaluate(x);
        let db = basis.derivatives(x);
        for i in 0..d {
            for j in i..d {
                g[(i, j)] += w * (b[i] * b[j] + db[i] * db[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    Gramian::new(g, "h1")
}

/// Orthonormalizes a basis with respect to `g` using `g = Q S Q^T` and `T = Q S^{-1/2}`.
///
/// Eigenvectors are matched to the basis function they load most heavily on, with that
/// loading made positive, so a diagonal `g` just rescales each function. Returns the new
/// basis and `T`, which satisfies `T^T g T = I`.
pub fn gramian_orthonormalize(basis: &UnivariateBasis, g: &Gramian) -> Result<(UnivariateBasis, DMatrix<f64>)> {
    let d = basis.dim();
    if g.dim() != d {
        return Err(Error::DimensionMismatch(format!("gramian of size {} for basis of dimension {d}", g.dim())));
    }
    let (vals, vecs) = sym_eigen(g.matrix());
    if vals[0] <= 0.0 {
        return Err(Error::NotPositiveDefinite(format!("{}: eigenvalue {:e}", g.tag(), vals[0])));
    }
    let dominant =
        |c: usize| (0..d).max_by(|&a, &b| vecs[(a, c)].abs().total_cmp(&vecs[(b, c)].abs())).expect("non-empty");
    let mut cols: Vec<usize> = (0..d).collect();
    cols.sort_by_key(|&c| (dominant(c), c));
    let mut t = DMatrix::zeros(d, d);
    for (k, &c) in cols.iter().enumerate() {
        let sign = vecs[(dominant(c), c)].signum();
        let scale = sign / vals[c].sqrt();
        for j in 0..d {
            t[(j, k)] = vecs[(j, c)] * scale;
        }
    }
    Ok((basis.transformed(&t), t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_basis() {
        let b = UnivariateBasis::legendre(1).unwrap();
        assert_eq!(b.evaluate(0.3), vec![1.0]);
        assert_eq!(b.sup_norms().unwrap(), &[1.0]);
        assert!(UnivariateBasis::legendre(0).is_err());
    }

    #[test]
    fn legendre_is_orthonormal() {
        let b = UnivariateBasis::legendre(8).unwrap();
        let g = b.l2_gram(32);
        assert!((g - DMatrix::identity(8, 8)).amax() < 1e-10);
    }

    #[test]
    fn legendre_endpoint_values_and_sup_norms() {
        let b = UnivariateBasis::legendre(6).unwrap();
        let at_one = b.evaluate(1.0);
        for (k, v) in at_one.iter().enumerate() {
            assert!((v - ((2 * k + 1) as f64).sqrt()).abs() < 1e-12);
        }
        let n = 20001;
        let mut sup = [0.0f64; 6];
        for i in 0..n {
            let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
            for (s, v) in sup.iter_mut().zip(b.evaluate(x)) {
                *s = s.max(v.abs());
            }
        }
        for (s, t) in sup.iter().zip(b.sup_norms().unwrap()) {
            assert!((s - t).abs() < 1e-8);
        }
    }

    #[test]
    fn legendre_product_weights_match_sup_norm_products() {
        // ω_ij = sqrt(2i+1) sqrt(2j+1) for the two-mode product basis
        let b = UnivariateBasis::legendre(4).unwrap();
        let s = b.sup_norms().unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let w = ((2 * i + 1) as f64).sqrt() * ((2 * j + 1) as f64).sqrt();
                assert!((s[i] * s[j] - w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hermite_values_and_orthonormality() {
        let b = UnivariateBasis::hermite(2).unwrap();
        assert_eq!(b.evaluate(0.7), vec![1.0, 0.7]);
        let b3 = UnivariateBasis::hermite(3).unwrap();
        let x = 1.3;
        assert!((b3.evaluate(x)[2] - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-14);
        assert!(b3.sup_norms().is_none());
        let g = UnivariateBasis::hermite(8).unwrap().l2_gram(32);
        assert!((g - DMatrix::identity(8, 8)).amax() < 1e-10);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for b in [UnivariateBasis::legendre(7).unwrap(), UnivariateBasis::hermite(7).unwrap()] {
            let x = 0.37;
            let h = 1e-6;
            let fd: Vec<f64> =
                b.evaluate(x + h).iter().zip(b.evaluate(x - h)).map(|(a, c)| (a - c) / (2.0 * h)).collect();
            for (a, c) in fd.iter().zip(b.derivatives(x)) {
                assert!((a - c).abs() < 1e-6 * (1.0 + c.abs()), "{a} vs {c}");
            }
        }
    }

    #[test]
    fn diag_sup_gramian_of_legendre() {
        let g = diag_sup_gramian(&UnivariateBasis::legendre(3).unwrap()).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 3.0, 5.0]));
        assert!((g.matrix() - expect).amax() < 1e-14);
        let g1 = diag_sup_gramian(&UnivariateBasis::legendre(1).unwrap()).unwrap();
        assert_eq!(g1.matrix()[(0, 0)], 1.0);
        assert!(matches!(diag_sup_gramian(&UnivariateBasis::hermite(3).unwrap()), Err(Error::InfiniteSupNorm(_))));
    }

    #[test]
    fn diag_sup_point_bound() {
        // |v(x)|² <= d v^T G v on a grid for random coefficient vectors
        let b = UnivariateBasis::legendre(5).unwrap();
        let g = diag_sup_gramian(&b).unwrap();
        let c = diag_sup_embedding_constant(&b);
        let v = nalgebra::DVector::from_vec(vec![0.3, -1.0, 0.2, 0.7, -0.4]);
        let bound = c * c * (v.transpose() * g.matrix() * &v)[(0, 0)];
        for i in 0..=200 {
            let x = -1.0 + i as f64 / 100.0;
            let val: f64 = b.evaluate(x).iter().zip(v.iter()).map(|(a, c)| a * c).sum();
            assert!(val * val <= bound + 1e-12);
        }
    }

    #[test]
    fn h1_gramian_values() {
        let g = h1_gramian(&UnivariateBasis::legendre(1).unwrap(), 4).unwrap();
        assert!((g.matrix()[(0, 0)] - 1.0).abs() < 1e-14);
        let g2 = h1_gramian(&UnivariateBasis::legendre(2).unwrap(), 8).unwrap();
        let expect = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 4.0]));
        assert!((g2.matrix() - expect).amax() < 1e-13);
        let g5 = H1::default().gramian(&UnivariateBasis::legendre(5).unwrap()).unwrap();
        assert_eq!(g5.matrix(), &g5.matrix().transpose());
        assert!(h1_gramian(&UnivariateBasis::legendre(5).unwrap(), 2).is_err());
        assert!(H1::default().gramian(&UnivariateBasis::hermite(6).unwrap()).is_ok());
    }

    #[test]
    fn non_spd_gramian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(Gramian::new(m, "bad").is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(Gramian::new(asym, "asym").is_err());
    }

    #[test]
    fn orthonormalize_identity_and_diagonal() {
        let b = UnivariateBasis::legendre(3).unwrap();
        let (same, t) = gramian_orthonormalize(&b, &Gramian::identity(3)).unwrap();
        assert!((t - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!((same.evaluate(0.4)[2] - b.evaluate(0.4)[2]).abs() < 1e-14);

        let g = diag_sup_gramian(&b).unwrap();
        let (scaled, t) = gramian_orthonormalize(&b, &g).unwrap();
        let expect = [1.0, 1.0 / 3f64.sqrt(), 1.0 / 5f64.sqrt()];
        for k in 0..3 {
            assert!((t[(k, k)] - expect[k]).abs() < 1e-14);
        }
        let x = -0.3;
        for (k, (a, c)) in scaled.evaluate(x).iter().zip(b.evaluate(x)).enumerate() {
            assert!((a - c * expect[k]).abs() < 1e-14);
        }
        // sup-normalized Legendre functions all have sup-norm 1
        for s in scaled.sup_norms().unwrap() {
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn orthonormalized_gram_is_identity() {
        let b = UnivariateBasis::legendre(6).unwrap();
        let g = h1_gramian(&b, 24).unwrap();
        let (nb, t) = gramian_orthonormalize(&b, &g).unwrap();
        let check = t.transpose() * g.matrix() * &t;
        assert!((check - DMatrix::identity(6, 6)).amax() < 1e-12);
        // the new basis' own H¹ Gramian is the identity as well
        let g_new = h1_gramian(&nb, 24).unwrap();
        assert!((g_new.matrix() - DMatrix::identity(6, 6)).amax() < 1e-10);
    }

    #[test]
    fn registry_lookup() {
        assert_eq!(gramian_rule("h1").unwrap().name(), "h1");
        assert_eq!(gramian_rule("diag_sup").unwrap().name(), "diag_sup");
        assert!(matches!(gramian_rule("nope"), Err(Error::UnknownStrategy { .. })));
        assert_eq!(UnivariateBasis::by_name("hermite", 3).unwrap().family(), Family::Hermite);
    }
}
