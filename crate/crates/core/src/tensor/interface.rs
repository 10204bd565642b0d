use nalgebra::DMatrix;
use rayon::prelude::*;

use super::train::{contract_left, contract_right, Component, TensorTrain};
use crate::error::{Error, Result};

/// Basis evaluations of one mode at `n` sample points, stored row-major `n x d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeValues {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl ModeValues {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch(format!("{} values for {n} samples of dimension {d}", data.len())));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("ragged basis evaluation rows".into()));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    /// Subset of rows in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.d);
        for &i in rows {
            data.extend_from_slice(self.row(i));
        }
        Self { n: rows.len(), d: self.d, data }
    }
}

/// Per-sample, per-mode basis evaluations `b(y^i_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    modes: Vec<ModeValues>,
}

impl BasisValues {
    pub fn new(modes: Vec<ModeValues>) -> Result<Self> {
        let n = modes.first().map_or(0, ModeValues::n_samples);
        if modes.iter().any(|m| m.n_samples() != n) {
            return Err(Error::DimensionMismatch("modes disagree on sample count".into()));
        }
        Ok(Self { modes })
    }

    pub fn n_samples(&self) -> usize {
        self.modes.first().map_or(0, ModeValues::n_samples)
    }

    pub fn order(&self) -> usize {
        self.modes.len()
    }

    pub fn mode(&self, m: usize) -> &ModeValues {
        &self.modes[m]
    }

    pub fn sample(&self, i: usize) -> Vec<&[f64]> {
        self.modes.iter().map(|m| m.row(i)).collect()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self { modes: self.modes.iter().map(|m| m.select(rows)).collect() }
    }

    /// Evaluates a tensor train at every sample.
    pub fn evaluate(&self, tt: &TensorTrain) -> Result<Vec<f64>> {
        self.check_train(tt)?;
        Ok((0..self.n_samples())
            .into_par_iter()
            .map(|i| tt.evaluate(&self.sample(i)).expect("dimensions checked"))
            .collect())
    }

    fn check_train(&self, tt: &TensorTrain) -> Result<()> {
        if tt.order() != self.order() {
            return Err(Error::DimensionMismatch(format!(
                "basis values for {} modes, train of order {}",
                self.order(),
                tt.order()
            )));
        }
        for (k, (mode, d)) in self.modes.iter().zip(tt.dims()).enumerate() {
            if mode.dim() != d {
                return Err(Error::DimensionMismatch(format!(
                    "mode {k}: basis dimension {} vs component dimension {d}",
                    mode.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Fixed neighbours of mode `m`: the left-orthogonal components `0..m` and the
/// right-orthogonal components `m+1..M`. Together they define the isometric embedding
/// of a component `V_m` into the full coefficient space.
#[derive(Debug, Clone)]
pub struct InterfaceStacks {
    mode: usize,
    dims: Vec<usize>,
    left: Vec<Component>,
    right: Vec<Component>,
    left_rank: usize,
    right_rank: usize,
}

impl InterfaceStacks {
    pub fn mode(&self) -> usize {
        self.mode
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Components `0..m`.
    pub fn left(&self) -> &[Component] {
        &self.left
    }

    /// Components `m+1..M`.
    pub fn right(&self) -> &[Component] {
        &self.right
    }

    /// Shape `(r_{m-1}, d_m, r_m)` of the free component.
    pub fn local_shape(&self) -> (usize, usize, usize) {
        (self.left_rank, self.dims[self.mode], self.right_rank)
    }

    /// Number of local coefficients `r_{m-1} d_m r_m`.
    pub fn local_dim(&self) -> usize {
        self.left_rank * self.dims[self.mode] * self.right_rank
    }

    /// Left interface vector for one sample: contraction of components `0..m` with the
    /// sample's basis vectors.
    pub fn left_vector(&self, sample: &[&[f64]]) -> Vec<f64> {
        self.left.iter().zip(sample).fold(vec![1.0], |acc, (c, b)| contract_left(&acc, c, b))
    }

    /// Right interface vector for one sample.
    pub fn right_vector(&self, sample: &[&[f64]]) -> Vec<f64> {
        self.right.iter().zip(&sample[self.mode + 1..]).rev().fold(vec![1.0], |acc, (c, b)| contract_right(&acc, c, b))
    }

    /// Local basis vector `l ⊗ b(y_m) ⊗ r` at one sample.
    pub fn local_basis(&self, sample: &[&[f64]]) -> Vec<f64> {
        let l = self.left_vector(sample);
        let r = self.right_vector(sample);
        let b = sample[self.mode];
        let mut out = Vec::with_capacity(self.local_dim());
        for &la in &l {
            for &bj in b {
                let w = la * bj;
                out.extend(r.iter().map(|&rc| w * rc));
            }
        }
        out
    }

    /// Gram matrix of the left interface functions under the per-mode inner product `g`,
    /// as `(G / s, ln s)`. Each step is rescaled to unit max entry to keep long trains
    /// in floating-point range.
    pub fn left_gram(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        let mut log_scale = 0.0;
        for comp in &self.left {
            let u = comp.left_unfolding();
            acc = u.transpose() * acc.kronecker(g) * &u;
            log_scale += normalize_max(&mut acc);
        }
        (acc, log_scale)
    }

    /// Right counterpart of [`InterfaceStacks::left_gram`].
    pub fn right_gram(&self, g: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
        let mut acc = DMatrix::from_element(1, 1, 1.0);
        let mut log_scale = 0.0;
        for comp in self.right.iter().rev() {
            let w = comp.right_unfolding();
            acc = &w * g.kronecker(&acc) * w.transpose();
            log_scale += normalize_max(&mut acc);
        }
        (acc, log_scale)
    }

    /// Embeds a local component into the full train `V̂_m V_m`.
    pub fn embed(&self, comp: &Component) -> Result<TensorTrain> {
        if comp.shape() != self.local_shape() {
            return Err(Error::DimensionMismatch(format!(
                "component shape {:?} does not fit interface shape {:?}",
                comp.shape(),
                self.local_shape()
            )));
        }
        let mut comps = self.left.clone();
        comps.push(comp.clone());
        comps.extend(self.right.iter().cloned());
        TensorTrain::new(comps)
    }
}

fn normalize_max(m: &mut DMatrix<f64>) -> f64 {
    let s = m.amax();
    if s > 0.0 && s.is_finite() {
        *m /= s;
        s.ln()
    } else {
        0.0
    }
}

/// Extracts the fixed interface of mode `m`. The train must be left-orthogonal before
/// `m` and right-orthogonal after it.
pub fn fixed_interface(tt: &TensorTrain, m: usize) -> Result<InterfaceStacks> {
    if m >= tt.order() {
        return Err(Error::DimensionMismatch(format!("mode {m} for order {}", tt.order())));
    }
    if !tt.gauge().is_centered_at(m) {
        return Err(Error::Orthogonality {
            mode: m,
            detail: format!("gauge {:?} is not centered at mode {m}", tt.gauge()),
        });
    }
    let comps = tt.components();
    Ok(InterfaceStacks {
        mode: m,
        dims: tt.dims(),
        left: comps[..m].to_vec(),
        right: comps[m + 1..].to_vec(),
        left_rank: comps[m].left_rank(),
        right_rank: comps[m].right_rank(),
    })
}

/// Design matrix of the local least-squares problem at the interface's mode.
///
/// Row `i` is `sqrt(w_i) * l(y^i) ⊗ b(y^i_m) ⊗ r(y^i)`, so that
/// `A vec(V_m)` equals the weighted evaluations of `V̂_m V_m` at the samples.
pub fn design_matrix(stacks: &InterfaceStacks, basis_values: &BasisValues, weights: &[f64]) -> Result<DMatrix<f64>> {
    let n = basis_values.n_samples();
    if weights.len() != n {
        return Err(Error::DimensionMismatch(format!("{} weights for {n} samples", weights.len())));
    }
    if basis_values.order() != stacks.order() {
        return Err(Error::DimensionMismatch(format!(
            "basis values for {} modes, interface of order {}",
            basis_values.order(),
            stacks.order()
        )));
    }
    for (k, &d) in stacks.dims().iter().enumerate() {
        if basis_values.mode(k).dim() != d {
            return Err(Error::DimensionMismatch(format!(
                "mode {k}: basis dimension {} vs interface dimension {d}",
                basis_values.mode(k).dim()
            )));
        }
    }
    if weights.iter().any(|&w| !(w >= 0.0)) {
        return Err(Error::InvalidArgument("sample weights must be non-negative".into()));
    }
    let p = stacks.local_dim();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let s = weights[i].sqrt();
            let mut row = stacks.local_basis(&basis_values.sample(i));
            row.iter_mut().for_each(|v| *v *= s);
            row
        })
        .collect();
    Ok(DMatrix::from_row_slice(n, p, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DimTuple;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_values(n: usize, dims: &[usize], rng: &mut ChaCha8Rng) -> BasisValues {
        BasisValues::new(
            dims.iter()
                .map(|&d| ModeValues::new(n, d, (0..n * d).map(|_| rng.sample(StandardNormal)).collect()).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn first_mode_has_scalar_left_interface() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dims = DimTuple::new(vec![3, 3, 3]).unwrap();
        let tt = TensorTrain::random(&dims, &[2, 2], &mut rng).unwrap().right_orthogonalized();
        let st = fixed_interface(&tt, 0).unwrap();
        assert!(st.left().is_empty());
        let vals = random_values(1, &[3, 3, 3], &mut rng);
        assert_eq!(st.left_vector(&vals.sample(0)), vec![1.0]);
    }

    #[test]
    fn wrong_gauge_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dims = DimTuple::new(vec![3, 3, 3]).unwrap();
        let tt = TensorTrain::random(&dims, &[2, 2], &mut rng).unwrap();
        assert!(matches!(fixed_interface(&tt, 1), Err(Error::Orthogonality { .. })));
        let r = tt.right_orthogonalized();
        assert!(fixed_interface(&r, 0).is_ok());
        assert!(fixed_interface(&r, 1).is_err());
    }

    #[test]
    fn two_mode_left_interface_is_first_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let dims = DimTuple::new(vec![4, 3]).unwrap();
        let tt = TensorTrain::random(&dims, &[2], &mut rng).unwrap().left_orthogonalized();
        let st = fixed_interface(&tt, 1).unwrap();
        assert_eq!(st.left()[0].left_unfolding(), tt.component(0).left_unfolding());
        let vals = random_values(1, &[4, 3], &mut rng);
        let s = vals.sample(0);
        let expect = tt.component(0).left_unfolding().transpose() * DVector::from_row_slice(s[0]);
        let got = st.left_vector(&s);
        for (a, b) in got.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_design_is_scaled_basis_matrix() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let vals = BasisValues::new(vec![ModeValues::from_rows(&rows).unwrap()]).unwrap();
        let tt = TensorTrain::rank_one(&[vec![0.0, 0.0]]).unwrap();
        let st = fixed_interface(&tt, 0).unwrap();
        let a = design_matrix(&st, &vals, &[4.0, 1.0]).unwrap();
        assert_eq!(a, DMatrix::from_row_slice(2, 2, &[2.0, 4.0, 3.0, 4.0]));
    }

    #[test]
    fn rank_one_constant_rows() {
        let tt = TensorTrain::rank_one(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let mut tt = tt;
        tt.move_core_to(1);
        let st = fixed_interface(&tt, 1).unwrap();
        let vals = BasisValues::new(vec![ModeValues::new(3, 2, vec![1.0; 6]).unwrap(); 3]).unwrap();
        let a = design_matrix(&st, &vals, &[1.0; 3]).unwrap();
        for i in 0..3 {
            assert_eq!(a.row(i), a.row(0));
        }
    }

    #[test]
    fn design_matrix_times_component_matches_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = DimTuple::new(vec![3, 4, 2, 3]).unwrap();
        let mut tt = TensorTrain::random(&dims, &[2, 3, 2], &mut rng).unwrap();
        let vals = random_values(20, &[3, 4, 2, 3], &mut rng);
        let w: Vec<f64> = (0..20).map(|i| 0.5 + i as f64 * 0.1).collect();
        for m in 0..4 {
            tt.move_core_to(m);
            let st = fixed_interface(&tt, m).unwrap();
            let a = design_matrix(&st, &vals, &w).unwrap();
            let v = DVector::from_row_slice(tt.component(m).data());
            let pred = a * v;
            let direct = vals.evaluate(&tt).unwrap();
            for i in 0..20 {
                let expect = w[i].sqrt() * direct[i];
                assert!((pred[i] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
            }
        }
    }

    #[test]
    fn embedding_is_an_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let dims = DimTuple::new(vec![3, 3, 3, 3]).unwrap();
        let mut tt = TensorTrain::random(&dims, &[3, 3, 3], &mut rng).unwrap();
        for m in 0..4 {
            tt.move_core_to(m);
            let st = fixed_interface(&tt, m).unwrap();
            let (l, d, r) = st.local_shape();
            let comp = Component::new(l, d, r, (0..l * d * r).map(|_| rng.sample(StandardNormal)).collect()).unwrap();
            let full = st.embed(&comp).unwrap().to_dense().unwrap();
            assert!((full.frobenius_norm() - comp.frobenius_norm()).abs() < 1e-12 * comp.frobenius_norm());
        }
    }
}
