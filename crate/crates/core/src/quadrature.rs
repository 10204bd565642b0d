//! Gauss quadrature rules for the two reference measures, normalized to probability
//! measures: uniform `dx/2` on `[-1, 1]` and the standard normal density.
//! Nodes and weights come from the Golub-Welsch eigenvalue method.

use nalgebra::DMatrix;

use crate::linalg::sym_eigen;

#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn golub_welsch(n: usize, off_diag: impl Fn(usize) -> f64) -> Quadrature {
    assert!(n >= 1, "quadrature needs at least one node");
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = off_diag(k);
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let (nodes, vectors) = sym_eigen(&jacobi);
    let mut weights: Vec<f64> = (0..n).map(|c| vectors[(0, c)].powi(2)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Quadrature { nodes, weights }
}

/// `n`-point Gauss-Legendre rule for the uniform probability measure on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Quadrature {
    golub_welsch(n, |k| {
        let k = k as f64;
        k / (4.0 * k * k - 1.0).sqrt()
    })
}

/// `n`-point Gauss-Hermite rule for the standard normal distribution.
pub fn gauss_hermite(n: usize) -> Quadrature {
    golub_welsch(n, |k| (k as f64).sqrt())
}
